"""Core computation for fidscan"""
