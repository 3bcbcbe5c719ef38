#!/usr/bin/env python3
"""Regenerates the bundled fixture in tests/fixtures.

Three states (OH, PA, MT), ten counties and a couple of cities per county,
daily disease and mobility rows for 2020-03-08..2020-03-24, a few hundred
posts and a POI list around Cleveland. Output is fully determined by the
seed below, so rerunning reproduces the committed files byte for byte.
"""

import calendar
import datetime as dt
import hashlib
import json
import random
import sys
from pathlib import Path

SEED = 2020
FIRST = dt.date(2020, 3, 8)
LAST = dt.date(2020, 3, 24)
DATES = [FIRST + dt.timedelta(days=i) for i in range((LAST - FIRST).days + 1)]

NATION = ("US", "United States", 328239523, 93.0, 0.165, 0.508, 39.83, -98.58)
STATES = [
    ("39", "Ohio", "OH", 11689100, 286.0, 0.172, 0.510, 40.42, -82.91),
    ("42", "Pennsylvania", "PA", 12801989, 286.1, 0.187, 0.510, 40.88, -77.80),
    ("30", "Montana", "MT", 1068778, 7.4, 0.194, 0.497, 46.88, -110.36),
]
# geo_id, state, name, population, density, lat, lon
COUNTIES = [
    ("39035", "39", "Cuyahoga", 1235072, 1389.0, 41.43, -81.67),
    ("39153", "39", "Summit", 541013, 1310.0, 41.13, -81.53),
    ("39049", "39", "Franklin", 1316756, 2459.0, 39.97, -83.01),
    ("39113", "39", "Montgomery", 531687, 1147.0, 39.75, -84.29),
    ("42091", "42", "Montgomery", 830915, 1713.0, 40.21, -75.37),
    ("42101", "42", "Philadelphia", 1584064, 11936.0, 40.00, -75.13),
    ("42003", "42", "Allegheny", 1216045, 1675.0, 40.47, -79.98),
    ("30111", "30", "Yellowstone", 161300, 61.0, 45.94, -108.27),
    ("30063", "30", "Missoula", 119600, 46.0, 47.04, -113.92),
    ("30031", "30", "Gallatin", 114434, 43.0, 45.54, -111.17),
]
# geo_id, county, name, population, density, lat, lon
CITIES = [
    ("3916000", "39035", "Cleveland", 383793, 5107.0, 41.4993, -81.6944),
    ("44106-area", "39035", "University Circle", 20813, 6190.0, 41.5075, -81.6054),
    ("3941664", "39035", "Lakewood", 49678, 8916.0, 41.4820, -81.7982),
    ("3961000", "39035", "Parma", 78103, 3912.0, 41.4048, -81.7229),
    ("3925704", "39035", "Euclid", 46550, 4337.0, 41.5931, -81.5268),
    ("3901000", "39153", "Akron", 197597, 3192.0, 41.0814, -81.5190),
    ("3974944", "39153", "Stow", 34785, 2004.0, 41.1595, -81.4404),
    ("3918000", "39049", "Columbus", 898553, 4117.0, 39.9612, -82.9988),
    ("3922694", "39049", "Dublin", 49328, 2039.0, 40.0992, -83.1141),
    ("3921000", "39113", "Dayton", 140407, 2528.0, 39.7589, -84.1916),
    ("3940040", "39113", "Kettering", 55175, 2944.0, 39.6895, -84.1688),
    ("4254656", "42091", "Norristown", 34324, 9906.0, 40.1215, -75.3399),
    ("4241432", "42091", "Lansdale", 16734, 7125.0, 40.2415, -75.2838),
    ("4260000", "42101", "Philadelphia", 1584064, 11936.0, 39.9526, -75.1652),
    ("4261000", "42003", "Pittsburgh", 302407, 5461.0, 40.4406, -79.9959),
    ("4205944", "42003", "Bethel Park", 32313, 2730.0, 40.3276, -80.0395),
    ("3006550", "30111", "Billings", 109577, 2503.0, 45.7833, -108.5007),
    ("3043525", "30111", "Laurel", 7024, 2000.0, 45.6691, -108.7715),
    ("3050200", "30063", "Missoula", 75516, 2525.0, 46.8721, -113.9940),
    ("3044500", "30063", "Lolo", 4399, 410.0, 46.7588, -114.0795),
    ("3008950", "30031", "Bozeman", 49831, 2556.0, 45.6770, -111.0429),
    ("3005050", "30031", "Belgrade", 8029, 2200.0, 45.7760, -111.1769),
]
# Exact values the demographic fixture must carry.
PINNED_CITY = {"3916000": (0.135, 0.518)}

# Cuyahoga's cumulative confirmed cases: none on 3/8, three on 3/9, and
# 125 confirmed with 33 new and 1 death on 3/22.
CUYAHOGA_CONFIRMED = [0, 3, 3, 4, 6, 9, 14, 20, 28, 38, 50, 65, 80, 92, 125, 160, 200]
CUYAHOGA_DEATHS = [0] * 14 + [1, 2, 3]

AWARE = [
    "Please keep social distancing and wash your hands, this is serious.",
    "Stocked up on sanitizer and masks, staying home and being careful.",
    "Everyone at work is taking precautions now, vigilant about hygiene.",
    "We are self isolating after the guidelines came out, please protect the vulnerable.",
    "Grocery store had markers for distancing, glad people are cautious.",
    "Our family is quarantining and following the guidelines closely.",
    "Schools closed and people are taking it seriously, flatten the curve.",
    "Working from home and staying informed, disinfecting everything.",
]
DISMISSIVE = [
    "Honestly this whole thing is overblown hype, nobody here cares.",
    "Bars packed last night, people are careless and ignoring everything.",
    "My coworkers think it is a hoax and keep partying.",
    "Everyone is acting like there is nothing going on, totally oblivious.",
    "People are unbothered, no masks anywhere, complacent as ever.",
    "Feels like an overreaction, the media is fearmongering again.",
]
NEUTRAL = [
    "Anyone know if the library is still open this week?",
    "What are the hours for the pharmacy downtown now?",
    "Traffic was lighter than usual on the highway today.",
    "Is the DMV accepting appointments right now?",
]

POIS = [
    ("Euclid Ave Market", "grocery", 41.5040, -81.6100, 4),
    ("Circle Fresh Foods", "grocery", 41.5110, -81.5990, 2),
    ("Fairfax Grocery", "grocery", 41.4930, -81.6250, 3),
    ("Lakewood Grocer", "grocery", 41.4820, -81.7990, 5),
    ("Cedar Pharmacy", "pharmacy", 41.5020, -81.6030, 3),
    ("Wade Park", "park", 41.5130, -81.6110, 1),
    ("Akron Food Hall", "grocery", 41.0820, -81.5180, 4),
    ("Norristown Market", "grocery", 40.1220, -75.3410, 3),
    ("Billings Grocery Co", "grocery", 45.7840, -108.5000, 2),
]


def author(rng):
    return hashlib.sha256(f"user{rng.randrange(140)}".encode()).hexdigest()[:16]


def timestamp(day, rng):
    noon = calendar.timegm(day.timetuple()) + 12 * 3600
    return noon + rng.randrange(-6 * 3600, 6 * 3600)


def fmt(x):
    return repr(float(x)) if isinstance(x, float) else str(x)


def demographics(rng):
    rows = ["geo_id,level,name,parent_geo_id,population,pop_density,pct_over_65,pct_female,lat,lon"]
    g, name, pop, dens, o65, fem, lat, lon = NATION
    rows.append(f"{g},nation,{name},,{pop},{dens},{o65},{fem},{lat},{lon}")
    for g, name, _, pop, dens, o65, fem, lat, lon in STATES:
        rows.append(f"{g},state,{name},US,{pop},{dens},{o65},{fem},{lat},{lon}")
    for g, parent, name, pop, dens, lat, lon in COUNTIES:
        o65 = round(rng.uniform(0.13, 0.21), 3)
        fem = round(rng.uniform(0.49, 0.53), 3)
        rows.append(f"{g},county,{name},{parent},{pop},{dens},{o65},{fem},{lat},{lon}")
    for g, parent, name, pop, dens, lat, lon in CITIES:
        o65, fem = PINNED_CITY.get(g, (round(rng.uniform(0.10, 0.20), 3), round(rng.uniform(0.48, 0.53), 3)))
        rows.append(f"{g},city,{name},{parent},{pop},{dens},{o65},{fem},{lat},{lon}")
    return rows


def county_curve(geo_id, rng):
    if geo_id == "39035":
        return CUYAHOGA_CONFIRMED, CUYAHOGA_DEATHS
    # Pennsylvania's first cases predate Ohio's; elsewhere in Ohio and in
    # Montana nothing is reported before Cuyahoga's first case.
    start = {"42091": -1, "42101": 0}.get(geo_id, rng.randrange(3, 9))
    scale = 2.0 if geo_id.startswith("30") else rng.uniform(4.0, 9.0)
    confirmed, deaths = [], []
    for i in range(len(DATES)):
        if i < max(start, 0) or (start > 0 and i == start - 1):
            c = 0
        else:
            c = int(scale * 1.28 ** (i - start)) if start >= 0 else int(2 + scale * 1.25 ** i)
            if geo_id == "42101" and i <= 1:
                c = 1
            if geo_id == "42091" and i <= 1:
                c = 2
        c = max(c, confirmed[-1] if confirmed else 0)
        confirmed.append(c)
        d = c // 90
        deaths.append(max(d, deaths[-1] if deaths else 0))
    return confirmed, deaths


def disease_rows(rng):
    state_abbr = {g: abbr for g, _, abbr, *_ in STATES}
    per_county = {g: county_curve(g, rng) for g, *_ in COUNTIES}
    county_state = {g: s for g, s, *_ in COUNTIES}
    out = []

    def emit(day_idx, geo_id, abbr, confirmed, deaths, previous):
        new = confirmed - previous
        rate = round(deaths / confirmed, 6) if confirmed else 0
        out.append((DATES[day_idx].isoformat(), geo_id, abbr, confirmed, new, deaths, rate))

    state_totals = {g: ([0] * len(DATES), [0] * len(DATES)) for g, *_ in STATES}
    for g, (conf, dead) in per_county.items():
        for i in range(len(DATES)):
            prev = conf[i - 1] if i else 0
            emit(i, g, state_abbr[county_state[g]], conf[i], dead[i], prev)
            state_totals[county_state[g]][0][i] += conf[i]
            state_totals[county_state[g]][1][i] += dead[i]
    # Cities carry a population share of their county.
    county_pop = {g: p for g, _, _, p, *_ in COUNTIES}
    for g, parent, _, pop, *_ in CITIES:
        share = min(1.0, pop / county_pop[parent])
        conf, dead = per_county[parent]
        cc = [int(c * share) for c in conf]
        cd = [min(int(d * share), c) for d, c in zip(dead, cc)]
        for i in range(len(DATES)):
            emit(i, g, state_abbr[county_state[parent]], cc[i], cd[i], cc[i - 1] if i else 0)
    nation = ([0] * len(DATES), [0] * len(DATES))
    for g, (conf, dead) in state_totals.items():
        for i in range(len(DATES)):
            emit(i, g, state_abbr[g], conf[i], dead[i], conf[i - 1] if i else 0)
            nation[0][i] += conf[i]
            nation[1][i] += dead[i]
    for i in range(len(DATES)):
        emit(i, "US", "US", nation[0][i], nation[1][i], nation[0][i - 1] if i else 0)
    out.sort(key=lambda r: (r[0], r[1]))
    return ["date,geo_id,state,confirmed,new_cases,deaths,fatality_rate"] + [
        ",".join(fmt(v) for v in r) for r in out
    ]


def mobility_rows(rng):
    rows = ["geo_id,date,level"]
    ids = [c[0] for c in COUNTIES] + [c[0] for c in CITIES]
    for day in DATES:
        for g in ids:
            if g in ("44106-area", "3916000") and day == LAST:
                level = 3
            else:
                level = rng.randint(1, 5)
            rows.append(f"{g},{day.isoformat()},{level}")
    return rows


def place_phrase(rng, pool):
    g, name, abbr, kind = rng.choice(pool)
    if kind == "county":
        return f"here in {name} County, {abbr}"
    return rng.choice([f"in {name}", f"around {name}, {abbr}", f"near downtown {name}"])


def posts(rng):
    state_of_county = {g: s for g, s, *_ in COUNTIES}
    abbr = {g: a for g, _, a, *_ in STATES}
    places = {"39": [], "42": [], "30": []}
    for g, s, name, *_ in COUNTIES:
        places[s].append((g, name, abbr[s], "county"))
    for g, county, name, *_ in CITIES:
        if g == "44106-area":
            continue
        places[state_of_county[county]].append((g, name, abbr[state_of_county[county]], "city"))
    subreddit = {"39": "CoronavirusOhio", "42": "CoronavirusPA", "30": "Montana"}
    cleveland = [p for p in places["39"] if p[0] in ("39035", "3916000", "3941664", "3961000")]

    out = []
    n = 0

    def add(state, title, body, day):
        nonlocal n
        n += 1
        out.append({
            "id": f"p{n:04d}",
            "subreddit": subreddit[state] if rng.random() < 0.7 else "Coronavirus",
            "created_utc": timestamp(day, rng),
            "author_hash": author(rng),
            "title": title,
            "body": body,
        })

    for day in DATES:
        # Cleveland area is well covered; the rest of Ohio and Pennsylvania less so.
        for state, count, pool in (("39", 7, cleveland), ("39", 4, places["39"]), ("42", 6, places["42"])):
            for _ in range(count):
                mood = rng.random()
                sentence = rng.choice(AWARE if mood < 0.5 else DISMISSIVE if mood < 0.8 else NEUTRAL)
                where = place_phrase(rng, pool)
                add(state, f"Update {where}", f"{sentence} Posting from {where}.", day)
    add("42", "Montgomery County",
        "I live in Montgomery County, PA and everyone here is acting like there's nothing going on.",
        dt.date(2020, 3, 15))
    # Montana is sparse: twelve posts from seven users over the whole window.
    montana_users = [hashlib.sha256(f"mt{i}".encode()).hexdigest()[:16] for i in range(7)]
    for i in range(12):
        day = DATES[(i * 3) % len(DATES)]
        where = place_phrase(rng, places["30"])
        n += 1
        out.append({
            "id": f"p{n:04d}",
            "subreddit": "Montana",
            "created_utc": timestamp(day, rng),
            "author_hash": montana_users[i % 7],
            "title": f"News {where}",
            "body": f"{rng.choice(AWARE + DISMISSIVE)} Seen {where}.",
        })
    out.sort(key=lambda p: (p["created_utc"], p["id"]))
    return [json.dumps(p, ensure_ascii=False) for p in out]


def pois():
    return ["name,tag,lat,lon,mobility"] + [f"{n},{t},{a},{o},{m}" for n, t, a, o, m in POIS]


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests" / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)
    files = {
        "demographics.csv": demographics(rng),
        "disease.csv": disease_rows(rng),
        "mobility.csv": mobility_rows(rng),
        "posts.jsonl": posts(rng),
        "pois.csv": pois(),
    }
    for name, lines in files.items():
        (out / name).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"{name}: {len(lines)} lines")


if __name__ == "__main__":
    main()
