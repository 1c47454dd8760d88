"""Command-line front end: a thin client over the HTTP service.

By default requests run in-process against the ASGI app, so no server
is needed; --server points the same commands at a remote instance. The
CLI reads course files and writes artifacts on the client side, passing
documents inline, so a remote service never touches local paths.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import httpx

from skillnav.service.client import make_client


def _call(client, method: str, path: str, **kwargs):
    try:
        resp = client.request(method, path, **kwargs)
    except httpx.HTTPError as e:
        raise click.ClickException(f"service unreachable: {e}") from e
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise click.ClickException(f"{resp.status_code}: {detail}")
    return resp.json()


def _course_payload(ref: str) -> dict:
    """Builtin names pass through; anything that looks like a file is
    read here and sent inline."""
    p = Path(ref)
    if p.suffix in {".yaml", ".yml"} or p.exists():
        try:
            return {"course_doc": p.read_text(encoding="utf-8")}
        except OSError as e:
            raise click.ClickException(f"cannot read course file {ref}: {e}") from e
    return {"course": ref}


def _split_multi(values: tuple[str, ...]) -> list[str]:
    out = []
    for v in values:
        out.extend(part for part in v.split(",") if part)
    return out


def _options_payload(budget_s, plan_horizon, history_cap) -> dict:
    opts = {}
    if budget_s is not None:
        opts["budget_s"] = budget_s
    if plan_horizon is not None:
        opts["plan_horizon"] = plan_horizon
    if history_cap is not None:
        opts["history_cap"] = history_cap
    return opts


server_option = click.option("--server", default=None, metavar="URL",
                             help="Remote service URL; default runs in-process.")


@click.group()
def main():
    """Skill-space navigation: episodes, evaluation matrices, replay, maps."""


@main.command()
@click.option("--course", required=True, help="Builtin course name or course file path.")
@click.option("--variant", required=True,
              help="Random | NoHistory | NoMultiStep | VlmPc | VlmPcIc.")
@click.option("--backend", default="oracle", show_default=True,
              help="oracle | oracle:<Flavor> | live.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--budget-s", default=None, type=float, help="Episode time budget in seconds.")
@click.option("--plan-horizon", default=None, type=int, help="Plan steps requested per query.")
@click.option("--history-cap", default=None, type=int,
              help="History entries kept in prompts; 0 = unlimited.")
@click.option("--out-dir", default=None, type=click.Path(file_okay=False),
              help="Write the episode transcript here.")
@server_option
def run(course, variant, backend, seed, budget_s, plan_horizon, history_cap, out_dir, server):
    """Run one episode and print its outcome."""
    client = make_client(server)
    body = {
        **_course_payload(course),
        "variant": variant,
        "backend": backend,
        "seed": seed,
        "include_transcript": out_dir is not None,
    }
    opts = _options_payload(budget_s, plan_horizon, history_cap)
    if opts:
        body["options"] = opts
    data = _call(client, "POST", "/episodes/run", json=body)
    s = data["summary"]
    click.echo(
        f"course={s['course']} variant={s['variant']} seed={s['seed']} "
        f"success={str(s['success']).lower()} time_s={s['time_s']:.1f} "
        f"steps={s['steps']} termination={s['termination']}"
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / data["transcript_filename"]
        path.write_text(data["transcript"], encoding="utf-8")
        click.echo(f"transcript: {path}")


@main.command()
@click.option("--courses", required=True, multiple=True,
              help="Comma-separated and/or repeated course names or files.")
@click.option("--variants", required=True, multiple=True,
              help="Comma-separated and/or repeated method variants.")
@click.option("--trials", default=5, show_default=True, type=int)
@click.option("--base-seed", default=0, show_default=True, type=int)
@click.option("--backend", default="oracle", show_default=True)
@click.option("--budget-s", default=None, type=float)
@click.option("--workers", default=1, show_default=True, type=int,
              help="Process pool size on the service side.")
@click.option("--out-dir", default=None, type=click.Path(file_okay=False),
              help="Write transcripts, results.csv, and summary.txt here.")
@server_option
def matrix(courses, variants, trials, base_seed, backend, budget_s, workers, out_dir, server):
    """Run a course x variant trial matrix and print per-cell metrics."""
    client = make_client(server)
    body: dict = {"courses": [], "course_docs": [], "variants": _split_multi(variants),
                  "trials": trials, "base_seed": base_seed, "backend": backend,
                  "workers": workers, "include_transcripts": out_dir is not None}
    for ref in _split_multi(courses):
        payload = _course_payload(ref)
        if "course" in payload:
            body["courses"].append(payload["course"])
        else:
            body["course_docs"].append(payload["course_doc"])
    opts = _options_payload(budget_s, None, None)
    if opts:
        body["options"] = opts
    data = _call(client, "POST", "/episodes/matrix", json=body)
    click.echo(data["summary"], nl=False)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in data["transcripts"].items():
            (out / name).write_text(text, encoding="utf-8")
        (out / "results.csv").write_text(data["results_csv"], encoding="utf-8")
        (out / "summary.txt").write_text(data["summary"], encoding="utf-8")
        click.echo(f"wrote {len(data['transcripts'])} transcripts + results.csv to {out}")


@main.command()
@click.option("--transcript", "transcript_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--course", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Course file; needed when the transcript's course is not builtin.")
@click.option("--relaxed", is_flag=True, help="Skip per-query digest comparisons.")
@server_option
def replay(transcript_path, course, relaxed, server):
    """Re-execute a stored transcript and verify it byte for byte."""
    client = make_client(server)
    body = {
        "transcript": Path(transcript_path).read_text(encoding="utf-8"),
        "strict_digest": not relaxed,
    }
    if course is not None:
        body["course_doc"] = Path(course).read_text(encoding="utf-8")
    data = _call(client, "POST", "/episodes/replay", json=body)
    if data["matches"]:
        click.echo("hash OK: replay reproduced the stored episode")
        return
    click.echo("replay diverged:", err=True)
    for m in data["mismatches"]:
        click.echo(f"  {m}", err=True)
    sys.exit(1)


@main.command()
@click.option("--course", required=True, help="Builtin course name or course file path.")
@click.option("--transcript", "transcript_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Overlay this episode's trajectory.")
@click.option("--out", "out_base", default=None, metavar="BASE",
              help="Write BASE.txt and BASE.svg; default prints the text map.")
@server_option
def render(course, transcript_path, out_base, server):
    """Render a course as an overhead ASCII map and SVG."""
    client = make_client(server)
    body = _course_payload(course)
    if transcript_path is not None:
        body["transcript"] = Path(transcript_path).read_text(encoding="utf-8")
    data = _call(client, "POST", "/render", json=body)
    if out_base is None:
        click.echo(data["ascii_map"], nl=False)
        return
    base = Path(out_base)
    base.parent.mkdir(parents=True, exist_ok=True)
    base.with_suffix(".txt").write_text(data["ascii_map"], encoding="utf-8")
    base.with_suffix(".svg").write_text(data["svg"], encoding="utf-8")
    click.echo(f"wrote {base.with_suffix('.txt')} and {base.with_suffix('.svg')}")


@main.command()
@server_option
def catalog(server):
    """Print the 18-command skill table."""
    client = make_client(server)
    data = _call(client, "GET", "/catalog")
    click.echo(data["table"])


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    uvicorn.run("skillnav.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
