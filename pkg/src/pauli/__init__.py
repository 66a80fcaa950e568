"""Pauli operators and simulated measurements"""
