"""Error certificates for reconstructed circuits"""
