"""Contract verification with proof-failure tests, seeded coverage suites and fix suggestions."""

__version__ = "0.1.0"
