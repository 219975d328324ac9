import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from warcfixtures import build_warc, mini_fixture_pages  # noqa: E402

from webrefine.pipeline import canonical_url  # noqa: E402


@pytest.fixture(scope="session")
def mini_fixture(tmp_path_factory):
    """14-page WARC exercising every rejection reason plus two survivors."""
    root = tmp_path_factory.mktemp("mini")
    info = mini_fixture_pages()
    warc_path = root / "mini.warc.gz"
    warc_path.write_bytes(build_warc(info["pages"], gzipped=True))
    registry = root / "registry.txt"
    registry.write_text(canonical_url(info["revisit_url"]) + "\n", encoding="utf-8")
    return {
        "warc": warc_path,
        "registry": registry,
        "pages": info["pages"],
        "root": root,
    }
