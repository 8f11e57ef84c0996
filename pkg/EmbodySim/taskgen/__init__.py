"""Rule-based task proposal, ground-truth episodes and incremental samples."""
