"""gridwelfare: two-stage power procurement and dynamic-pricing demand response.

Simulates a utility company that buys day-ahead base-power against an
uncertain effective renewable, tops up in real time, and steers per-user
consumption toward long-run targets through deficit-queue-driven dynamic
pricing.  Includes certified LP oracles for the stationary benchmarks on
small instances, a FastAPI service wrapping the core, and a thin CLI.
"""

__version__ = "0.1.0"
