"""Time-related utility functions."""


def format_duration(total_seconds: float) -> str:
    """Format an elapsed duration as a human-readable string.

    Formats time showing a maximum of 2 units (e.g., "2h 15m", "1m 45s",
    "3.2s"). Sub-minute durations keep one decimal.

    Args:
        total_seconds: Elapsed time in seconds

    Returns:
        str: Formatted duration string, or "N/A" for negative input
    """
    if total_seconds < 0:
        return "N/A"

    if total_seconds < 60:
        return f"{total_seconds:.1f}s"

    whole = int(total_seconds)
    days = whole // 86400
    hours = (whole % 86400) // 3600
    minutes = (whole % 3600) // 60
    seconds = whole % 60

    if days > 0:
        return f"{days}d {hours}h" if hours > 0 else f"{days}d"
    elif hours > 0:
        return f"{hours}h {minutes}m" if minutes > 0 else f"{hours}h"
    else:
        return f"{minutes}m {seconds}s" if seconds > 0 else f"{minutes}m"
