"""Integration tests"""

