# Services Package (Algorithmen und Simulation)
