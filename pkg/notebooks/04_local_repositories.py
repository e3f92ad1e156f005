# %% [markdown]
# # Mining local repositories
#
# Builds two tiny git repositories, maps each to a service, and runs the same
# analysis twice: straight from git and from an exported commit log. Both paths
# give the same matrix. Pass an output directory as the first argument to keep
# the files.

# %%
import os
import subprocess
import sys
import tempfile
from pathlib import Path

from orgcoupling import ServiceMap, coupling_matrix, load_history, write_commit_log
from orgcoupling.cli import main

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
root.mkdir(parents=True, exist_ok=True)


def commit(repo: Path, path: str, text: str, who: str, when: str) -> None:
    (repo / path).parent.mkdir(parents=True, exist_ok=True)
    (repo / path).write_text(text)
    env = {**os.environ, "GIT_AUTHOR_NAME": who, "GIT_AUTHOR_EMAIL": f"{who}@example.org",
           "GIT_AUTHOR_DATE": when, "GIT_COMMITTER_NAME": who,
           "GIT_COMMITTER_EMAIL": f"{who}@example.org", "GIT_COMMITTER_DATE": when}
    subprocess.run(["git", "-C", str(repo), "add", "-A"], check=True)
    subprocess.run(["git", "-C", str(repo), "commit", "-qm", path], check=True, env=env)


# %%
repos = {name: root / "repos" / name for name in ("orders", "payments")}
for repo in repos.values():
    repo.mkdir(parents=True, exist_ok=True)
    subprocess.run(["git", "init", "-q", str(repo)], check=True)

script = [("orders", "src/api.py", 12, "alice"), ("payments", "src/pay.py", 8, "alice"),
          ("orders", "src/db.py", 5, "bob"), ("payments", "src/ledger.py", 20, "bob"),
          ("orders", "src/api.py", 3, "alice"), ("payments", "src/pay.py", 30, "carol")]
for day, (name, path, lines, who) in enumerate(script, start=1):
    commit(repos[name], path, "x\n" * lines, who, f"2021-03-{day:02d}T12:00:00Z")

# %% [markdown]
# A polyrepo map names one service per repository.

# %%
smap = ServiceMap.polyrepo(["orders", "payments"])
from_git = load_history([str(p) for p in repos.values()], smap)
print(from_git.summary())

log = root / "commits.jsonl"
write_commit_log([c.raw() for c in from_git.commits], log)
from_log = load_history([log], smap)
print("identical matrices:", coupling_matrix(from_git) == coupling_matrix(from_log))
print(coupling_matrix(from_git).values)

# %% [markdown]
# The command line does the same thing and writes CSV, JSON and SVG artifacts.

# %%
(root / "services.yaml").write_text(
    "rules:\n  - {service: orders, repo_pattern: orders}\n"
    "  - {service: payments, repo_pattern: payments}\n")
main(["coupling", "--repos", *map(str, repos.values()), "--service-map",
      str(root / "services.yaml"), "--format", "csv", "--format", "svg",
      "--out", str(root / "out")])
print(sorted(p.name for p in (root / "out").iterdir()))
