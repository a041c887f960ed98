"""Frame documents and ASCII rendering of highway states.

A frame document is resolution independent: clients lay out lanes and car
rectangles from the geometry carried in the document itself.
"""

from __future__ import annotations

FRAME_VERSION = 1


def render_frame(payload: dict, road: dict) -> dict:
    """Portable frame description of one concrete step."""
    agent = payload["agent"]
    horizon = road["horizon"]
    cars = [
        {
            "lane": agent["lane"],
            "pos": agent["pos"],
            "speed": agent["speed"],
            "color": "green",
            "agent": True,
        }
    ]
    for car in payload["cars"]:
        cars.append(
            {
                "lane": car["lane"],
                "pos": car["pos"],
                "speed": car["speed"],
                "color": "blue",
                "agent": False,
            }
        )
    return {
        "v": FRAME_VERSION,
        "step": payload["step"],
        "road": {
            "lanes": road["lanes"],
            "lane_width": road["lane_width"],
            "window": [
                round(agent["pos"] - horizon, 2),
                round(agent["pos"] + horizon, 2),
            ],
        },
        "cars": cars,
        "collision": bool(payload["collision"]),
    }


def ascii_frame(payload: dict, road: dict, width: int = 64) -> str:
    """Debug rendering: one text row per lane, agent marked A (X on collision)."""
    agent = payload["agent"]
    horizon = road["horizon"]
    left = agent["pos"] - horizon
    span = 2 * horizon

    def column(pos: float) -> int:
        return max(0, min(width - 1, int((pos - left) / span * (width - 1))))

    rows = [[" "] * width for _ in range(road["lanes"])]
    for car in payload["cars"]:
        rows[car["lane"] - 1][column(car["pos"])] = "b"
    marker = "X" if payload["collision"] else "A"
    rows[agent["lane"] - 1][column(agent["pos"])] = marker
    lines = [f"{i + 1}|{''.join(row)}|" for i, row in enumerate(rows)]
    lines.append(f"   step {payload['step']}")
    return "\n".join(lines)


def ascii_clip(frames: list[dict], road: dict, width: int = 64, max_frames: int = 8) -> str:
    """A strip of evenly sampled frames from a clip window."""
    if not frames:
        return "(no frames)"
    if len(frames) <= max_frames:
        chosen = frames
    else:
        stride = (len(frames) - 1) / (max_frames - 1)
        chosen = [frames[round(i * stride)] for i in range(max_frames)]
    return "\n\n".join(ascii_frame(f, road, width) for f in chosen)
