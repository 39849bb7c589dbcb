"""Regenerate the synthetic gazetteer and evaluation fixtures under tests/data.

The gazetteer is invented (names are drawn from a fixed word list); only its
per-kind counts are meant to match the published Melbourne figures.
"""
import csv
import json
import random
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"

SURNAMES = """Abbott Ainslie Allan Anderson Ashley Bain Baker Barkly Barry Bates Baxter Bell Bennett Black
Blair Bolton Bond Bowen Boyd Bradley Brennan Brooks Brown Bruce Buckley Burke Burns Butler Byrne Cairns
Campbell Carey Carroll Carter Chandler Chapman Clark Clarke Cole Collins Connor Cook Cooper Cox Craig
Crawford Cross Cullen Cunningham Dale Dalton Daly Davey Davis Dawson Dean Dixon Doyle Drummond Duffy
Duncan Dunn Dwyer Eastwood Edwards Elliott Evans Fairfax Farrell Ferguson Fisher Fitzroy Fleming Fletcher
Forbes Ford Foster Fox Francis Fraser Fuller Gardner Gibson Gilbert Gordon Graham Grant Gray Green
Gregory Griffin Hall Hamilton Hanson Hardy Harris Harvey Hayes Henderson Higgins Hill Hodgson Holmes Hope
Howard Hughes Hunt Hunter Jackson James Jarvis Jenkins Johnston Jones Jordan Kane Kelly Kennedy Kerr
King Knight Lambert Lawson Lee Lewis Lloyd Lowe Lynch Macarthur Mackay Marsh Martin Mason Matthews
Maxwell Mclean Miller Mitchell Moore Morgan Morris Murphy Murray Nash Nelson Newman Nicholson Norton
Oliver Owen Palmer Parker Parkes Patterson Pearce Perry Phillips Pitt Porter Powell Price Quinn Reid
Reynolds Rice Richards Riley Roberts Robertson Rogers Rose Ross Russell Ryan Scott Shaw Simpson Smith
Spencer Stanley Stewart Stone Sullivan Sutton Taylor Thompson Todd Turner Wade Walker Wallace Walsh Ward
Warner Watson Webb Wells West White Wilkins Williams Willis Wilson Wood Wright Young Ackland Balfour
Cathcart Dunlop Elgin Fawkner Gipps Hoddle Irvine Jolimont Kinross Latrobe Lyell Melville Napier Ormond
Pascoe Queensberry Rathdowne Sturt Tivoli Urquhart Vaughan Wakefield Yorke Zeal Lygon Dorcas Moray Baillieu
Arden Bourke""".split()
TYPES = ["Street", "Lane", "Place", "Alley", "Walk", "Court"]
COMMON = ["Anchor", "Bluestone", "Cannery", "Foundry", "Granary", "Harbour", "Market", "Mill", "Orchard",
          "Quarry", "Rope", "Tannery", "Timber", "Wattle", "Wharf", "Windmill", "Wool", "Yarra", "Brewery"]
GROUPS = ["sailors", "coopers", "drovers", "miners", "teamsters", "weavers", "carters", "masons", "smiths"]

COUNTS = {"named_person": 143, "unnamed_person": 68, "non_person": 19, "unknown": 18}


def gazetteer(rng: random.Random) -> list[list[str]]:
    names = rng.sample(SURNAMES, COUNTS["named_person"] + COUNTS["unnamed_person"] + COUNTS["unknown"])
    rows = []
    it = iter(names)
    for _ in range(COUNTS["named_person"]):
        s = next(it)
        rows.append([f"{s} {rng.choice(TYPES)}", s, f"{rng.choice(['John', 'Mary', 'William', 'Ann'])} {s}", "named_person"])
    for _ in range(COUNTS["unnamed_person"]):
        s = next(it)
        rows.append([f"{s} {rng.choice(TYPES)}", s, f"{rng.choice(GROUPS)} working near {s} store", "unnamed_person"])
    for w in COMMON:
        rows.append([f"{w} {rng.choice(TYPES)}", w, f"a local {w.lower()}", "non_person"])
    for _ in range(COUNTS["unknown"]):
        s = next(it)
        rows.append([f"Little {s} {rng.choice(TYPES)}", s, "", ""])
    rng.shuffle(rows)
    return rows


def main():
    rng = random.Random(20240501)
    (DATA / "gazetteer").mkdir(parents=True, exist_ok=True)
    with open(DATA / "gazetteer" / "melbourne.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "type", "city", "state", "country", "origin_text", "origin_kind"])
        for name, _, origin, kind in gazetteer(rng):
            w.writerow([name, name.split()[-1], "Melbourne", "Victoria", "Australia", origin, kind])

    # 248 queries: 222 with an extracted graph, 93 of those mentioning the origin
    (DATA / "eval").mkdir(parents=True, exist_ok=True)
    flags = [(True, True)] * 93 + [(True, False)] * (222 - 93) + [(False, False)] * (248 - 222)
    rng.shuffle(flags)
    with open(DATA / "eval" / "table3_meta.ndjson", "w", encoding="utf-8") as fh:
        for i, (ext, men) in enumerate(flags):
            fh.write(json.dumps({"query_id": f"q{i:03d}", "kg_extracted": ext, "origin_mentioned": men}) + "\n")


if __name__ == "__main__":
    main()
