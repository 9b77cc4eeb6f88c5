"""Test fixtures for omra-lab tests."""
