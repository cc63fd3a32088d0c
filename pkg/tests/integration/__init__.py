# Integration tests for evolution-systems
