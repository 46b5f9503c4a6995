"""Controlled Birkhoff averages for flip-flop families."""
