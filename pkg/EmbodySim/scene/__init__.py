"""Object-centric scene model, sampling and validation."""
