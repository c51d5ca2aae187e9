import pytest


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path_factory, monkeypatch):
    # keep weight tables out of the user's home cache
    monkeypatch.setenv("RSSQUANT_CACHE", str(tmp_path_factory.getbasetemp() / "weight-cache"))
