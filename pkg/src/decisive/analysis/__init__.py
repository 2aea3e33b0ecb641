"""Decision procedures, quantitative approximation and simulation."""
