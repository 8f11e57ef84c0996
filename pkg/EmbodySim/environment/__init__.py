"""Environment half of the action/observation loop."""
