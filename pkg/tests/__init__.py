# Tests package for evolution-systems
