"""
Test suite for the W-State Expansion Toolkit
"""
