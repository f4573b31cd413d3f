import pytest

from lldash.media import StreamTimeline, default_ladder, video_ladder
from lldash.netmodel import LinkParams, NetworkProfile


@pytest.fixture(scope="session")
def ladder():
    return default_ladder()


@pytest.fixture(scope="session")
def vladder(ladder):
    return video_ladder(ladder)


@pytest.fixture(scope="session")
def short_timeline():
    return StreamTimeline(total_segments=20)


@pytest.fixture(scope="session")
def link():
    return LinkParams(rtt_s=0.05)


@pytest.fixture()
def flat_profile():
    def make(kbps: float, duration: float = 3000.0) -> NetworkProfile:
        return NetworkProfile([0.0], [kbps * 1000.0], duration)

    return make
