from datetime import date

import httpx
import pytest

from gridprice import fetch
from gridprice.market_data import cache_path


def test_fetch_day_writes_cache_layout(tmp_path):
    seen = []

    def handler(request):
        seen.append(str(request.url))
        return httpx.Response(200, text="payload")

    client = httpx.Client(transport=httpx.MockTransport(handler))
    written = fetch.fetch_day("NYISO", date(2019, 7, 16), tmp_path, client)
    assert len(written) == 2
    assert cache_path(tmp_path, "NYISO", date(2019, 7, 16), "rt_lmp").read_text() == "payload"
    assert any("20190716realtime_zone.csv" in u for u in seen)
    # cached files are not fetched again
    assert fetch.fetch_day("NYISO", date(2019, 7, 16), tmp_path, client) == []


def test_fetch_range_is_per_day(tmp_path):
    client = httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(200, text="x")))
    paths = fetch.fetch_range("NYISO", date(2019, 7, 1), date(2019, 7, 3), tmp_path, client=client)
    assert len(paths) == 6
    assert (tmp_path / "NYISO" / "2019-07-02" / "genfuelmix.csv").exists()


def test_unsupported_iso(tmp_path):
    with pytest.raises(fetch.FetchNotSupported):
        fetch.fetch_day("PJM", date(2019, 7, 16), tmp_path, httpx.Client())
