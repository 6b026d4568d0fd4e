import pytest

from scatternet.model import Hierarchy, NodeSnapshot, Topology


def make_topology(points, battery=1.0, wifi=True, area=(10.0, 10.0)):
    """Topology from a list of (x, y); battery/wifi may be scalars or lists."""
    n = len(points)
    bat = battery if isinstance(battery, (list, tuple)) else [battery] * n
    wf = wifi if isinstance(wifi, (list, tuple)) else [wifi] * n
    nodes = tuple(NodeSnapshot(i, float(x), float(y), float(bat[i]), bool(wf[i])) for i, (x, y) in enumerate(points))
    return Topology(nodes, area)


def two_super_clusters() -> Hierarchy:
    """Two super clusters: own 4 + member masters {7,3,4}; own 4 + member masters {4,7}."""
    l1, l2 = {}, {}
    nxt = 0

    def cluster(size):
        nonlocal nxt
        head = nxt
        for i in range(size + 1):
            l1[head + i] = head
        nxt += size + 1
        return head

    for own, subs in ((4, (7, 3, 4)), (4, (4, 7))):
        s = cluster(own)
        l2[s] = s
        for size in subs:
            l2[cluster(size)] = s
    return Hierarchy(l1, l2)


@pytest.fixture
def two_supers():
    return two_super_clusters()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
