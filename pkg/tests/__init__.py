# Tests for the Otto engine simulator
