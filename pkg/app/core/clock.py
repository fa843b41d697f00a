from datetime import datetime, timezone


def get_utc_now():
    """Get current datetime in UTC"""
    return datetime.now(timezone.utc)


def run_stamp(now: datetime | None = None) -> str:
    """Compact timestamp used in preset output directory names"""
    now = now or get_utc_now()
    if now.tzinfo is None:
        now = now.replace(tzinfo=timezone.utc)
    return now.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
