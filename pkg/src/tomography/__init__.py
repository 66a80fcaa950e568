"""Layer-by-layer reconstruction from exact or sampled state access"""
