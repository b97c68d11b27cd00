"""Command-line surface.

    stratus run [tokens...]           submit a run (local service or remote)
    stratus jobs list|show|cancel|watch|logs
    stratus templates list|show|register
    stratus catalog show
    stratus budget show [ID]
    stratus report --out DIR          CSV table + rendered figures
    stratus serve                     start the HTTP gateway

Without STRATUS_URL the CLI hosts an in-process service: runs execute in
this process and records land in the configured record directory. With
STRATUS_URL set (or --url), job verbs talk to a running gateway instead.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional

import click

from ..config import ServiceConfig, load_config
from ..errors import StratusError
from .cliparse import parse_run_tokens
from .client import HttpGateway, template_body
from .service import DryRunReport, StratusService


def _build_config(config_path: Optional[str]) -> ServiceConfig:
    if config_path:
        return load_config(config_path)
    cfg = ServiceConfig()
    cfg.record_dir = Path("stratus-records")
    cfg.workdir_root = Path("stratus-work")
    return cfg


class Context:
    def __init__(self, config_path: Optional[str], url: Optional[str], user: str):
        self.config_path = config_path
        self.url = url
        self.user = user
        self._service: Optional[StratusService] = None

    @property
    def remote(self) -> Optional[HttpGateway]:
        if self.url:
            return HttpGateway(self.url, user=self.user)
        return None

    def service(self) -> StratusService:
        if self._service is None:
            self._service = StratusService(_build_config(self.config_path))
        return self._service

    def close(self):
        if self._service is not None:
            self._service.close()


@click.group()
@click.option("--config", "config_path", envvar="STRATUS_CONFIG", default=None,
              help="Service configuration file (YAML).")
@click.option("--url", envvar="STRATUS_URL", default=None,
              help="Remote gateway address; omit to run in-process.")
@click.option("--user", envvar="STRATUS_USER", default="anonymous",
              help="Principal for permission checks.")
@click.pass_context
def cli(ctx, config_path, url, user):
    ctx.obj = Context(config_path, url, user)
    ctx.call_on_close(ctx.obj.close)


def _echo_event(event: dict):
    lines = event.get("lines") or []
    suffix = f"  {lines[0]}" if lines else ""
    click.echo(f"[{event['seq']:>2}] {event['state']:<12}{suffix}")


def _echo_dry_run(report: dict):
    click.echo("dry run:")
    click.echo(f"  instance        {report['instance_name']} "
               f"({report['provider']}/{report['region']})")
    click.echo(f"  nodes           {report['num_nodes']} "
               f"({report['total_slots']} slots)")
    if report.get("np"):
        click.echo(f"  mpi             np={report['np']} grid={tuple(report['grid'])}")
    click.echo(f"  price           {report['price_per_hour']:.4f}/h")
    click.echo(f"  estimated cost  {report['estimated_cost']:.4f}")
    click.echo(f"  rationale       {report['rationale']}")


@cli.command(context_settings={"ignore_unknown_options": True})
@click.argument("tokens", nargs=-1, type=click.UNPROCESSED)
@click.pass_obj
def run(obj: Context, tokens):
    """Submit a run request; see the gateway grammar for flags."""
    parsed = parse_run_tokens(["run", *tokens])
    user = parsed.user or obj.user

    remote = obj.remote
    if remote is not None:
        remote.user = user
        result = remote.submit(parsed.request)
        if "dry_run" in result:
            _echo_dry_run(result["dry_run"])
            return
        job_id = result["job_id"]
        click.echo(job_id)
        if parsed.wait:
            final_state = None
            for event in remote.stream_events(job_id):
                _echo_event(event)
                final_state = event["state"]
            job = remote.get_job(job_id)
            _echo_summary(final_state, job.get("cost_settled"))
        return

    service = obj.service()
    result = service.submit(parsed.request, principal=user)
    if isinstance(result, DryRunReport):
        _echo_dry_run(result.as_dict())
        return
    click.echo(result)
    if parsed.wait:
        for status in service.job_status_stream(result):
            _echo_event(status._asdict())
        job = service.get_job(result)
        _echo_summary(job.state.value, job.cost_settled)
    else:
        # in-process runs must finish before the interpreter exits anyway;
        # block here so ctrl-c semantics stay predictable
        service.wait_for(result)


def _echo_summary(state, cost):
    cost_text = f"{cost:.4f}" if cost is not None else "-"
    click.echo(f"final: {state}  settled cost: {cost_text}")


@cli.group()
def jobs():
    """Inspect and control jobs."""


@jobs.command("list")
@click.option("--workspace", default=None)
@click.pass_obj
def jobs_list(obj: Context, workspace):
    remote = obj.remote
    if remote is not None:
        rows = remote.list_jobs(workspace)
        for row in rows:
            click.echo(f"{row['id']}  {row['state']:<12} "
                       f"{row['template']['name']}@{row['template']['version']}")
        return
    for job in obj.service().list_jobs(workspace):
        click.echo(f"{job.id}  {job.state.value:<12} "
                   f"{job.template_version.name}@{job.template_version.version}")


@jobs.command("show")
@click.argument("job_id")
@click.pass_obj
def jobs_show(obj: Context, job_id):
    remote = obj.remote
    if remote is not None:
        job = remote.get_job(job_id)
        click.echo(f"id        {job['id']}")
        click.echo(f"state     {job['state']}")
        click.echo(f"template  {job['template']['name']}@{job['template']['version']}")
        click.echo(f"instance  {job['plan']['instance']} x{job['plan']['num_nodes']}")
        click.echo(f"estimate  {job['cost_estimate']:.4f}")
        if job.get("cost_settled") is not None:
            click.echo(f"settled   {job['cost_settled']:.4f}")
        if job.get("record_id"):
            click.echo(f"record    {job['record_id']}")
        return
    job = obj.service().get_job(job_id)
    click.echo(f"id        {job.id}")
    click.echo(f"state     {job.state.value}")
    click.echo(f"template  {job.template_version.name}@{job.template_version.version}")
    click.echo(f"instance  {job.plan.instance.name} x{job.plan.num_nodes}")
    click.echo(f"estimate  {job.cost_estimate:.4f}")
    if job.cost_settled is not None:
        click.echo(f"settled   {job.cost_settled:.4f}")
    record_id = obj.service().record_for(job_id)
    if record_id:
        click.echo(f"record    {record_id}")


@jobs.command("logs")
@click.argument("job_id")
@click.pass_obj
def jobs_logs(obj: Context, job_id):
    remote = obj.remote
    if remote is not None:
        job = remote.get_job(job_id)
        for event in job["events"]:
            for line in event["lines"]:
                click.echo(line)
        return
    job = obj.service().get_job(job_id)
    for rec in job.events:
        for line in rec.lines:
            click.echo(line)


@jobs.command("cancel")
@click.argument("job_id")
@click.pass_obj
def jobs_cancel(obj: Context, job_id):
    remote = obj.remote
    if remote is not None:
        cancelled = remote.cancel(job_id)
    else:
        cancelled = obj.service().cancel_job(job_id, principal=obj.user)
    click.echo("cancellation requested" if cancelled else "job already terminal")


@jobs.command("watch")
@click.argument("job_id")
@click.pass_obj
def jobs_watch(obj: Context, job_id):
    remote = obj.remote
    if remote is not None:
        for event in remote.stream_events(job_id):
            _echo_event(event)
        return
    for status in obj.service().job_status_stream(job_id):
        _echo_event(status._asdict())


@cli.group()
def templates():
    """List, inspect, and register workflow templates."""


@templates.command("list")
@click.pass_obj
def templates_list(obj: Context):
    remote = obj.remote
    if remote is not None:
        for t in remote.templates():
            click.echo(f"{t['name']}@{t['version']}  {t['description']}")
        return
    for name, version in obj.service().registry.list_versions():
        t = obj.service().registry.get(name, version)
        click.echo(f"{name}@{version}  {t.description}")


@templates.command("show")
@click.argument("name")
@click.option("--version", type=int, default=None)
@click.pass_obj
def templates_show(obj: Context, name, version):
    remote = obj.remote
    if remote is not None:
        doc = remote.template(name, version)
        click.echo(f"name          {doc['name']}")
        click.echo(f"version       {doc['version']}")
        if doc.get("setup_command"):
            click.echo(f"setup         {doc['setup_command']}")
        click.echo(f"run           {doc['run_command']}")
        for p in doc["parameters"]:
            click.echo(f"param         {p['name']}: {p['kind']} = {p['default']!r}")
        return
    t = obj.service().registry.get(name, version)
    click.echo(f"name          {t.name}")
    click.echo(f"version       {t.version}")
    if t.setup_command:
        click.echo(f"setup         {t.setup_command}")
    click.echo(f"run           {t.run_command}")
    for decl in t.parameters.values():
        click.echo(f"param         {decl.name}: {decl.kind} = {decl.default!r}")


@templates.command("register")
@click.argument("path", type=click.Path(exists=True))
@click.pass_obj
def templates_register(obj: Context, path):
    from ..workflow import load_template
    with open(path, "rb") as fh:
        t = load_template(fh)
    remote = obj.remote
    if remote is not None:
        result = remote.register_template(template_body(t))
        click.echo(f"{result['name']}@{result['version']}")
        return
    tv = obj.service().registry.register_template(t)
    click.echo(f"{tv.name}@{tv.version}")


@cli.group()
def catalog():
    """Inspect the instance catalog."""


@catalog.command("show")
@click.option("--provider", default=None)
@click.pass_obj
def catalog_show(obj: Context, provider):
    remote = obj.remote
    entries = (remote.catalog()["entries"] if remote is not None
               else [
                   {"provider": e.provider, "region": e.region, "name": e.name,
                    "vcpus": e.vcpus, "memory_gib": e.memory_gib, "gpus": e.gpus,
                    "price_per_hour": e.price_per_hour}
                   for e in obj.service().snapshot.entries
               ])
    for e in entries:
        if provider and e["provider"] != provider:
            continue
        click.echo(f"{e['provider']:<6} {e['region']:<12} {e['name']:<26} "
                   f"{e['vcpus']:>3} vcpu  {e['memory_gib']:>6.0f} GiB  "
                   f"{e['gpus']} gpu  {e['price_per_hour']:>8.4f}/h")


@cli.group()
def budget():
    """Inspect shared budgets."""


@budget.command("show")
@click.argument("budget_id", default="default")
@click.pass_obj
def budget_show(obj: Context, budget_id):
    remote = obj.remote
    if remote is not None:
        b = remote.budget(budget_id)
    else:
        snap = obj.service().governance.budget(budget_id).snapshot()
        b = {"id": budget_id, "allocation": snap.allocation,
             "reserved": snap.reserved, "spent": snap.spent,
             "headroom": snap.headroom}
    click.echo(f"budget     {b['id']}")
    click.echo(f"allocation {b['allocation']:.4f}")
    click.echo(f"reserved   {b['reserved']:.4f}")
    click.echo(f"spent      {b['spent']:.4f}")
    click.echo(f"headroom   {b['headroom']:.4f}")


@cli.command()
@click.option("--template", "template_name", default=None,
              help="Restrict to one template's records.")
@click.option("--out", "outdir", type=click.Path(), required=True)
@click.pass_obj
def report(obj: Context, template_name, outdir):
    """Write the scaling table (CSV) plus time/efficiency figures (PNG)."""
    paths = obj.service().write_report(outdir, template_name)
    for path in paths:
        click.echo(str(path))


@cli.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.option("--dashboard", "dashboard_dir", type=click.Path(), default=None,
              help="Directory of built dashboard assets to serve at /.")
@click.pass_obj
def serve(obj: Context, host, port, dashboard_dir):
    """Start the HTTP gateway."""
    import uvicorn

    from .api import create_app

    app = create_app(obj.service(),
                     dashboard_dir=Path(dashboard_dir) if dashboard_dir else None)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main():
    try:
        cli(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)
    except StratusError as exc:
        click.echo(f"error [{type(exc).__name__}]: {exc}", err=True)
        sys.exit(exc.exit_code)


if __name__ == "__main__":
    main()
