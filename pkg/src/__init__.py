# Quantum Otto engine simulator package
