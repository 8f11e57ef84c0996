"""Dataset persistence, generation, replay and the protocol server."""
