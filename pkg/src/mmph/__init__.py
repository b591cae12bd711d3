"""Joint continuous/discrete phase-type models of (Y, N)."""
