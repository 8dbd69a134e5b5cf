"""Reaction models, linear spreading, front profiles, spectra, invasion runs and experiments"""
