"""Tests for the hpsr codec."""
