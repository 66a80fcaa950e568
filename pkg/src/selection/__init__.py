"""Renormalized observable selection, measurement plans and budgets"""
