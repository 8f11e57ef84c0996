"""Feature encoders, adapters and the SELECT head."""
