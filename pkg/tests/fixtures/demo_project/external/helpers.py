"""Shared helpers shipped next to the notebooks."""

import csv

import requests


def load_table(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def fetch(url):
    return requests.get(url, timeout=10).text
