"""Hand-derived fixtures shared by unit and acceptance tests."""

import random

H32 = "d41d8cd98f00b204e9800998ecf8427e"
H40 = "da39a3ee5e6b4b0d3255bfef95601890afd80709"
H64 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"

# (input path, expected normalized path); expectations written out by hand from the rules
NORMALIZE_GOLDEN = [
    # temp files
    ("/tmp/session.tmp", "/tmp/<tmpfile>"),
    ("/home/u/.notes.txt.swp", "/home/u/<tmpfile>"),
    ("/var/tmp/build.TEMP", "/var/tmp/<tmpfile>"),
    ("/home/u/.vimrc.swx", "/home/u/<tmpfile>"),
    ("/tmp/tmpa1b2c3d4", "/tmp/<tmpfile>"),
    ("/tmp/tmpZ9_x8Qwe", "/tmp/<tmpfile>"),
    ("/tmp/report.tmp.4Fq9", "/tmp/<tmpfile>"),
    ("/tmp/data.swp~", "/tmp/<tmpfile>"),
    ("upload.tmp", "<tmpfile>"),
    ("/usr/lib/tmpfiles.d/x.conf", "/usr/lib/tmpfiles.d/x.conf"),
    ("/etc/tmpfiles", "/etc/tmpfiles"),
    ("/tmp/.tmp", "/tmp/.tmp"),
    ("/tmp/template.txt", "/tmp/template.txt"),
    ("/srv/tmp.tmpl", "/srv/tmp.tmpl"),
    # /proc pids
    ("/proc/1234/status", "/proc/<pid>/status"),
    ("/proc/1/cmdline", "/proc/<pid>/cmdline"),
    ("/proc/42", "/proc/<pid>"),
    ("/proc/self/status", "/proc/self/status"),
    ("/proc/1234/task/5678/stat", "/proc/<pid>/task/<pid>/stat"),
    ("/proc/self/task/77/comm", "/proc/self/task/<pid>/comm"),
    ("/proc/sys/kernel/pid_max", "/proc/sys/kernel/pid_max"),
    ("/host/proc/99/stat", "/host/proc/99/stat"),
    ("/proc/12ab/stat", "/proc/12ab/stat"),
    # hashes
    (f"/var/cache/{H32}", "/var/cache/hash value"),
    (f"/var/lib/docker/image/{H40}/json", "/var/lib/docker/image/hash value/json"),
    (f"/var/lib/docker/overlay2/{H64}/merged/etc/passwd", "/var/lib/docker/overlay2/hash value/merged/etc/passwd"),
    (f"/cache/{H32.upper()}", "/cache/hash value"),
    (f"/cache/{H32[:-1]}", f"/cache/{H32[:-1]}"),
    (f"/cache/{H32}0", f"/cache/{H32}0"),
    (f"/cache/g{H32[1:]}", f"/cache/g{H32[1:]}"),
    (f"/cache/{H32}.json", f"/cache/{H32}.json"),
    (f"/a/{H32}/b/{H40}", "/a/hash value/b/hash value"),
    # combinations and passthrough
    ("/proc/4321/root/tmp/work.tmp", "/proc/<pid>/root/tmp/<tmpfile>"),
    (f"/var/cache/{H64}/upload.tmp", "/var/cache/hash value/<tmpfile>"),
    ("<NA>", "<NA>"),
    ("", ""),
    ("/etc/localtime", "/etc/localtime"),
    ("LC_TIME", "LC_TIME"),
]

_PIECES = [
    "tmp", "proc", "etc", "var", "home", "usr", "lib", "self", "task", "x.tmp", "a.swp", "b.TEMP",
    "q.swx~", "c.tmp.9z", "log", "<pid>", "<tmpfile>", "hash value", ".tmp", "tmpfiles.d",
]


def random_paths(n: int, seed: int = 7) -> list[str]:
    """Paths mixing temp names, /proc pids, hex runs of assorted lengths and plain words."""
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        parts = []
        if rng.random() < 0.3:
            parts += ["", "proc", str(rng.randint(0, 10**6))]
            if rng.random() < 0.4:
                parts += ["task", str(rng.randint(0, 10**6))]
        elif rng.random() < 0.8:
            parts.append("")
        for _ in range(rng.randint(0, 5)):
            r = rng.random()
            if r < 0.25:
                parts.append("".join(rng.choice("0123456789abcdefABCDEF") for _ in range(rng.choice([8, 31, 32, 33, 40, 64]))))
            elif r < 0.35:
                parts.append(str(rng.randint(0, 99999)))
            elif r < 0.45:
                parts.append("tmp" + "".join(rng.choice("abcXYZ0123_") for _ in range(rng.randint(3, 10))))
            else:
                parts.append(rng.choice(_PIECES))
        out.append("/".join(parts))
    return out


CROND_EVENT = {
    "proc_name": "crond",
    "type": "execve",
    "fd_filename": "<NA>",
    "user_name": "root",
    "user_shell": "/bin/bash",
    "evt_args": "sh",
}
