"""Financial KPI extraction and natural-language querying toolkit."""

__version__ = "0.1.0"
