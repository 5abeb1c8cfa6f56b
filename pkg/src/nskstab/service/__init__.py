"""HTTP service wrapping the stability toolkit."""
