# Test fixtures package: rule and host graphs
