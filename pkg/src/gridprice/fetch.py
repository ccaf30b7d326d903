"""Download raw ISO feeds into the local cache.

Only this module touches the network.  Everything downstream reads the
cache written here, so tests can run on fixture directories.  Public,
unauthenticated day files are wired up for NYISO; other ISOs must have their
raw files placed in the cache in the generic layout.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from datetime import date
from typing import Optional

import httpx

from .market_data import GEN_FEED, PRICE_FEED, IsoId, cache_path, _days

logger = logging.getLogger(__name__)

URL_TEMPLATES = {
    IsoId.NYISO: {
        PRICE_FEED: "http://mis.nyiso.com/public/csv/realtime/{ymd}realtime_zone.csv",
        GEN_FEED: "http://mis.nyiso.com/public/csv/rtfuelmix/{ymd}rtfuelmix.csv",
    },
}


class FetchNotSupported(NotImplementedError):
    pass


def fetch_day(iso, day: date, cache_dir, client: httpx.Client, overwrite: bool = False) -> list:
    """Fetch both feeds for one day; returns the paths written."""
    iso = IsoId.parse(iso)
    templates = URL_TEMPLATES.get(iso)
    if templates is None:
        raise FetchNotSupported(
            f"no public day-file endpoint configured for {iso.value}; "
            "place raw files in the cache manually"
        )
    written = []
    for feed, template in templates.items():
        target = cache_path(cache_dir, iso, day, feed)
        if target.exists() and not overwrite:
            continue
        url = template.format(ymd=day.strftime("%Y%m%d"))
        resp = client.get(url, timeout=60.0)
        resp.raise_for_status()
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(resp.content)
        written.append(target)
        logger.info("fetched %s -> %s", url, target)
    return written


def fetch_range(iso, start: date, end: date, cache_dir,
                client: Optional[httpx.Client] = None, workers: int = 4) -> list:
    """Fetch every day in ``[start, end]``, one worker per day file."""
    own = client is None
    client = client or httpx.Client(follow_redirects=True)
    try:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda d: fetch_day(iso, d, cache_dir, client), _days(start, end)))
    finally:
        if own:
            client.close()
    return [p for paths in results for p in paths]
