"""Unit tests"""

