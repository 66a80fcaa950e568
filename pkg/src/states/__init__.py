"""Target states for tomography runs"""
