"""Core configuration, errors and tensor primitives"""
