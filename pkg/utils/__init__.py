"""Configuration, errors, reports and sweeps"""
