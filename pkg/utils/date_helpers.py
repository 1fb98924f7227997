import re
import datetime
import logging
from typing import Optional

from dateutil import parser
from dateutil.relativedelta import relativedelta

logger = logging.getLogger(__name__)

_RELATIVE = re.compile(r'^(\d+)\s+(day|week|month)s?\s+ago$')


def parse_date(date_str: Optional[str], today: Optional[datetime.date] = None) -> Optional[datetime.date]:
    """
    Parse the --since argument of the run-history query.

    Accepts "today", "yesterday", "last week", "N days/weeks/months ago" and
    anything python-dateutil understands ("2024-05-01", "May 1 2024").

    Args:
        date_str (str): String describing a date
        today (datetime.date, optional): Reference date. Defaults to today.

    Returns:
        datetime.date: The parsed date, or None if parsing failed
    """
    if today is None:
        today = datetime.date.today()
    if not date_str:
        return today

    date_str = date_str.lower().strip()

    if date_str in ('today', 'now'):
        return today
    if date_str == 'yesterday':
        return today - datetime.timedelta(days=1)
    if date_str == 'last week':
        return today - datetime.timedelta(days=7)

    match = _RELATIVE.match(date_str)
    if match:
        count, unit = int(match.group(1)), match.group(2)
        return today - relativedelta(**{f"{unit}s": count})

    try:
        return parser.parse(date_str, dayfirst=False, yearfirst=False).date()
    except (ValueError, OverflowError):
        logger.warning(f"Could not parse date string: {date_str}")
        return None


def format_timestamp(moment: datetime.datetime) -> str:
    return moment.strftime("%Y-%m-%d %H:%M")
