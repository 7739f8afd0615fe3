"""Tests Package."""
