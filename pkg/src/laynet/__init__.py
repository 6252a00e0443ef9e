"""Discrete-time simulator of a fee-priced base ledger with an off-chain channel overlay."""

__version__ = "0.1.0"
