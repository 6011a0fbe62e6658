from typing import Any, Dict, List

from rich.panel import Panel
from rich.table import Table


def format_number(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def summary_panel(summary: Dict[str, Any]) -> Panel:
    """Generic key/value view of an experiment summary."""
    lines = []
    for key in sorted(summary):
        if key in ("kind", "artifacts", "hull", "decoder"):
            continue
        lines.append(f"[bold]{key}[/bold]: {format_number(summary[key])}")
    if summary.get("artifacts"):
        lines.append(f"[dim]artifacts: {', '.join(summary['artifacts'])}[/dim]")
    return Panel.fit("\n".join(lines) or "(empty)", title=f"[bold magenta]{summary.get('kind', '')}[/bold magenta]",
                     border_style="cyan")


def hull_table(hull: List[List[float]], title: str = "Lower convex hull",
               columns=("rate", "distortion")) -> Table:
    table = Table(title=title)
    for name in columns:
        table.add_column(name, justify="right")
    for row in hull:
        table.add_row(*(format_number(v) for v in row))
    return table


def lower_bound_panel(summary: Dict[str, Any]) -> Panel:
    ok = summary.get("passed")
    status = "[bold green]PASS[/bold green]" if ok else "[bold red]FAIL[/bold red]"
    body = (f"{status}\n"
            f"Instances: {summary.get('instances', 0)}\n"
            f"Violations: {summary.get('violations', 0)}\n"
            f"Zero-rate mismatches: {summary.get('zero_rate_mismatches', 0)}")
    return Panel.fit(body, title="Operational vs informational bound", border_style="green" if ok else "red")


def render(summary: Dict[str, Any]) -> List[Any]:
    """Renderables for the console, chosen by experiment kind."""
    kind = summary.get("kind")
    if kind == "theorem1-check":
        return [lower_bound_panel(summary)]
    out: List[Any] = [summary_panel(summary)]
    if kind == "drf" and summary.get("hull"):
        out.append(hull_table(summary["hull"]))
    elif kind == "sr" and summary.get("hull"):
        out.append(hull_table(summary["hull"], "Distortion frontier hull", ("D1", "D2")))
    return out
