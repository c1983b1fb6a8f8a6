"""Shared fixtures: the financial fixture database, a 13-item benchmark
dataset over it, and the scripted transcripts that drive offline runs.

The numbers here are hand-derived from the fixture data below; tests freeze
them and assert the pipeline reproduces them exactly.
"""

from __future__ import annotations

import json
import sqlite3
from pathlib import Path

FINANCIAL_DDL = [
    "CREATE TABLE district (district_id INTEGER PRIMARY KEY, A2 TEXT, A16 INTEGER)",
    "CREATE TABLE account (account_id INTEGER PRIMARY KEY, district_id INTEGER, date TEXT)",
    "CREATE TABLE client (client_id INTEGER PRIMARY KEY, gender TEXT, birth_date TEXT, district_id INTEGER)",
    "CREATE TABLE disp (disp_id INTEGER PRIMARY KEY, client_id INTEGER, account_id INTEGER, type TEXT)",
    "CREATE TABLE trans (trans_id INTEGER PRIMARY KEY, account_id INTEGER, date TEXT, amount REAL)",
]

FINANCIAL_ROWS = {
    "district": [(1, "Prague", 85), (2, "Brno", 40), (3, "Ostrava", 85)],
    "account": [
        (1, 1, "1995-03-24"),
        (2, 1, "1996-07-01"),
        (3, 2, "1997-01-15"),
        (4, 3, "1998-10-01"),
        (5, 2, "1999-05-30"),
    ],
    "client": [
        (1, "F", "1970-01-01", 1),
        (2, "M", "1980-05-05", 2),
        (3, "F", "1990-09-09", 3),
        (4, "M", "1975-12-12", 1),
    ],
    "disp": [(1, 1, 1, "OWNER"), (2, 2, 2, "OWNER"), (3, 3, 3, "OWNER"), (4, 4, 4, "OWNER")],
    "trans": [
        (1, 1, "1998-10-14", 840.0),
        (2, 2, "1998-10-14", 120.5),
        (3, 3, "1999-01-01", 840.0),
        (4, 4, "2000-02-02", 55.0),
        (5, 1, "1998-11-11", 300.0),
    ],
}

# Curated-hint fixtures in the interchange shape.
HINT_CLIENT_ACCOUNT = {
    "description": "Join clients with their accounts and filter by specific account ID.",
    "sql_query": (
        "SELECT STRFTIME('%Y', T1.birth_date) FROM client AS T1 "
        "INNER JOIN disp AS T2 ON T1.client_id = T2.client_id WHERE T2.account_id = 1"
    ),
}
HINT_ACCOUNT_TRANS = {
    "description": (
        "Join accounts with transactions to find the account opening date "
        "for a specific transaction amount and date."
    ),
    "sql_query": (
        "SELECT T1.date FROM account AS T1 INNER JOIN trans AS T2 "
        "ON T1.account_id = T2.account_id WHERE T2.amount = 840 "
        "AND T2.date = '1998-10-14'"
    ),
}
HINT_DISTRICT_ACCOUNT = {
    "description": (
        "Join districts with accounts to count how many accounts were opened "
        "in the branch with the largest number of crimes."
    ),
    "sql_query": (
        "SELECT COUNT(T2.account_id) FROM district AS T1 INNER JOIN account AS T2 "
        "ON T1.district_id = T2.district_id GROUP BY T1.A16 ORDER BY T1.A16 DESC LIMIT 1"
    ),
}
HINT_BROKEN = {
    "description": "Accounts with large transfers.",
    "sql_query": "SELECT account_id FROM trans WHERE amnt = 840",
}
HINT_BROKEN_FIXED_SQL = "SELECT account_id FROM trans WHERE amount = 840"

TABLE_I_HINTS = [HINT_CLIENT_ACCOUNT, HINT_ACCOUNT_TRANS, HINT_DISTRICT_ACCOUNT]


def build_financial_db(path: Path) -> Path:
    con = sqlite3.connect(path)
    try:
        for statement in FINANCIAL_DDL:
            con.execute(statement)
        for table, rows in FINANCIAL_ROWS.items():
            placeholders = ", ".join("?" * len(rows[0]))
            con.executemany(f"INSERT INTO {table} VALUES ({placeholders})", rows)
        con.commit()
    finally:
        con.close()
    return path


def build_library_db(path: Path) -> Path:
    """A second, unrelated database for multi-db split and registry tests."""
    con = sqlite3.connect(path)
    try:
        con.execute("CREATE TABLE books (book_id INTEGER PRIMARY KEY, title TEXT, year INTEGER)")
        con.execute(
            "CREATE TABLE loans (loan_id INTEGER PRIMARY KEY, book_id INTEGER, day TEXT)"
        )
        con.executemany(
            "INSERT INTO books VALUES (?, ?, ?)",
            [(1, "Dune", 1965), (2, "Solaris", 1961), (3, "Blindsight", 2006)],
        )
        con.executemany(
            "INSERT INTO loans VALUES (?, ?, ?)",
            [(1, 1, "2024-01-01"), (2, 1, "2024-02-02"), (3, 3, "2024-03-03")],
        )
        con.commit()
    finally:
        con.close()
    return path


# One benchmark item per row: (id, difficulty, question, gold_sql,
# first_prediction, repair_prediction or None, expected_ea_match).
# Predictions and outcomes are hand-derived from FINANCIAL_ROWS.
BENCH_ITEMS = [
    (
        "q01", "simple", "How many accounts are there?",
        "SELECT COUNT(*) FROM account",
        "SELECT COUNT(*) FROM account", None, True,
    ),
    (
        "q02", "simple", "List all district names.",
        "SELECT A2 FROM district",
        "SELECT A2 FROM district ORDER BY A2 DESC", None, True,
    ),
    (
        "q03", "moderate", "Which account ids belong to district 1?",
        "SELECT account_id FROM account WHERE district_id = 1",
        "SELECT account_id FROM acount WHERE district_id = 1",
        "SELECT account_id FROM account WHERE district_id = 1", True,
    ),
    (
        "q04", "simple", "How many female clients are there?",
        "SELECT COUNT(*) FROM client WHERE gender = 'F'",
        "SELECT COUNT(client_id) FROM client WHERE gender = 'F'", None, True,
    ),
    (
        "q05", "challenging",
        "How many accounts were opened in the branch with the largest number of crimes?",
        HINT_DISTRICT_ACCOUNT["sql_query"],
        (
            "SELECT COUNT(T2.account_id) FROM district AS T1 INNER JOIN account AS T2 "
            "ON T1.district_id = T2.districtid GROUP BY T1.A16 ORDER BY T1.A16 DESC LIMIT 1"
        ),
        HINT_DISTRICT_ACCOUNT["sql_query"], True,
    ),
    (
        "q06", "moderate", "What is the total transaction amount per account?",
        "SELECT account_id, SUM(amount) FROM trans GROUP BY account_id",
        "SELECT t.account_id, SUM(t.amount) FROM trans AS t GROUP BY t.account_id",
        None, True,
    ),
    (
        "q07", "moderate",
        "When was the account with the 840 transaction on 1998-10-14 opened?",
        HINT_ACCOUNT_TRANS["sql_query"],
        "SELECT date FROM account WHERE account_id = 1", None, True,
    ),
    (
        "q08", "moderate", "Which client ids live in district 1?",
        "SELECT client_id FROM client WHERE district_id = 1",
        "SELECT client_id FROM client WHERE district_id = 2", None, False,
    ),
    (
        "q09", "challenging", "Which account ids have a transaction of exactly 840?",
        "SELECT DISTINCT account_id FROM trans WHERE amount = 840",
        "SELECT DISTINCT account_id FROM trans WHERE amnt = 840",
        "SELECT account_id FROM trans WHERE amount = 840 AND date = '1998-10-14'",
        False,
    ),
    (
        "q10", "simple", "How many transactions happened on 1998-10-14?",
        "SELECT COUNT(*) FROM trans WHERE date = '1998-10-14'",
        "SELECT COUNT(*) FROM trans WHERE date = '1998-10-14'", None, True,
    ),
    (
        "q11", "simple", "What is the birth date of client 3?",
        "SELECT birth_date FROM client WHERE client_id = 3",
        "SELECT birth_date FROM client WHERE client_id = 3", None, True,
    ),
    (
        "q12", "challenging", "How many accounts does each district name have?",
        (
            "SELECT T1.A2, COUNT(T2.account_id) FROM district AS T1 INNER JOIN account AS T2 "
            "ON T1.district_id = T2.district_id GROUP BY T1.A2 ORDER BY T1.A2"
        ),
        (
            "SELECT T1.A2, COUNT(T2.account_id) FROM district AS T1 INNER JOIN account AS T2 "
            "ON T1.district_id = T2.district_id GROUP BY T1.A2"
        ),
        None, True,
    ),
    (
        "q13", "simple", "What is the largest transaction amount?",
        "SELECT MAX(amount) FROM trans",
        "SELECT amount FROM trans ORDER BY amount DESC LIMIT 1", None, True,
    ),
]

# Chosen so that the seeded per-db split keeps every repair/mismatch item in
# the test set (see test_bench.py::test_fixture_split_is_frozen).
BENCH_SEED = 2
HISTORY_IDS = ["q02", "q07", "q10"]
TEST_IDS = [i[0] for i in BENCH_ITEMS if i[0] not in HISTORY_IDS]
# Items whose scripted transcript forces one repair round each.
REPAIR_IDS = ["q03", "q05", "q09"]
EXPECTED_EA = {i[0]: i[6] for i in BENCH_ITEMS if i[0] not in HISTORY_IDS}
EXPECTED_MATCHES = sum(1 for v in EXPECTED_EA.values() if v)  # 8 of 10


def dataset_records() -> list[dict]:
    records = []
    for item_id, difficulty, question, gold, _pred, _fix, _ea in BENCH_ITEMS:
        record = {
            "question_id": item_id,
            "db_id": "financial",
            "question": question,
            "SQL": gold,
            "difficulty": difficulty,
        }
        if item_id == "q04":
            record["evidence"] = "Gender 'F' denotes female clients."
        records.append(record)
    return records


def curation_entries() -> list[dict]:
    """Scripted curation: four proposed hints, one broken, then its repair."""
    proposed = [HINT_CLIENT_ACCOUNT, HINT_BROKEN, HINT_ACCOUNT_TRANS, HINT_DISTRICT_ACCOUNT]
    return [
        {
            "match": "Historical queries",
            "response": "```json\n" + json.dumps(proposed, indent=2) + "\n```",
        },
        {
            "match": "amnt = 840",
            "response": f"```sql\n{HINT_BROKEN_FIXED_SQL}\n```",
        },
    ]


def generation_entries() -> list[dict]:
    """Scripted generation/repair responses for the ten test items, in id order."""
    by_id = {item[0]: item for item in BENCH_ITEMS}
    entries: list[dict] = []
    for item_id in TEST_IDS:
        _, _, question, _, prediction, fix, _ = by_id[item_id]
        entries.append({"match": question, "response": f"```sql\n{prediction}\n```"})
        if fix is not None:
            entries.append({"match": question, "response": f"```sql\n{fix}\n```"})
    return entries


def hisql_transcript() -> list[dict]:
    return curation_entries() + generation_entries()


def baseline_transcript() -> list[dict]:
    return generation_entries()


def write_bench_tree(root: Path) -> dict[str, Path]:
    """Materialize dataset.json + db_root with the financial fixture."""
    root.mkdir(parents=True, exist_ok=True)
    db_root = root / "databases"
    db_root.mkdir(exist_ok=True)
    build_financial_db(db_root / "financial.sqlite")
    dataset_path = root / "dataset.json"
    dataset_path.write_text(
        json.dumps(dataset_records(), indent=2) + "\n", encoding="utf-8"
    )
    return {"dataset": dataset_path, "db_root": db_root}


FIELD_MAP = {
    "question_key": "question",
    "sql_key": "SQL",
    "db_id_key": "db_id",
    "difficulty_key": "difficulty",
    "evidence_key": "evidence",
    "id_key": "question_id",
}
