"""MERA circuits and ascending superoperators"""
