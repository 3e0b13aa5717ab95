"""Stock query catalog.

Named query texts used by the CLI examples, the docs, and the benchmark
suites. All of them target the default predicate vocabulary (ns1 =
http://schema.org/). OCCUPIED_HIGH_CO2 ships in two variants because two
gate thresholds (1100 and 1180 ppm) are in circulation for the same check;
they disagree and both are kept as-is.
"""

_PROLOGUE = """\
PREFIX ns1: <http://schema.org/>
PREFIX rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#>
PREFIX xsd: <http://www.w3.org/2001/XMLSchema#>
"""

HUMIDITY_ABOVE_30 = _PROLOGUE + """\
SELECT ?date ?humidity
WHERE {
  ?description ns1:date ?date .
  ?description ns1:Humidity ?humidity .
  FILTER (xsd:float(?humidity) > 30)
}
"""

TEMPERATURE_ABOVE_20 = _PROLOGUE + """\
SELECT ?date ?temperature
WHERE {
  ?description ns1:date ?date .
  ?description ns1:Temperature ?temperature .
  FILTER (xsd:float(?temperature) > 20)
}
"""

WARM_EARLY_FEBRUARY = _PROLOGUE + """\
SELECT ?date ?temperature
WHERE {
  ?description ns1:date ?date .
  ?description ns1:Temperature ?temperature .
  FILTER (xsd:dateTime(?date) >= xsd:dateTime("2015-02-03T08:00:00") &&
          xsd:dateTime(?date) <= xsd:dateTime("2015-02-04T23:00:00") &&
          (xsd:float(?temperature) > 23))
}
"""

OCCUPIED_HIGH_CO2 = _PROLOGUE + """\
SELECT ?date ?CO2 ?occupancy ?humidity
WHERE {
  ?description ns1:date ?date .
  ?description ns1:CO2 ?CO2 .
  ?description ns1:Occupancy ?occupancy .
  ?description ns1:Humidity ?humidity .
  FILTER (xsd:float(?CO2) > 1100 && xsd:integer(?occupancy) = 1 && xsd:float(?humidity) > 12)
}
"""

OCCUPIED_HIGH_CO2_STRICT = OCCUPIED_HIGH_CO2.replace("> 1100", "> 1180")

TYPE_LISTING = _PROLOGUE + """\
SELECT ?entity ?class
WHERE {
  ?entity rdf:type ?class .
}
"""

ORDERED_WARM_JOIN = _PROLOGUE + """\
SELECT ?date ?temperature ?humidity ?CO2
WHERE {
  ?description ns1:date ?date .
  ?description ns1:Temperature ?temperature .
  ?description ns1:Humidity ?humidity .
  ?description ns1:CO2 ?CO2 .
  FILTER (xsd:float(?temperature) > 20 && xsd:float(?humidity) > 25 && xsd:float(?CO2) > 500)
}
ORDER BY ?date
"""

CATALOG = {
    "humidity_above_30": HUMIDITY_ABOVE_30,
    "temperature_above_20": TEMPERATURE_ABOVE_20,
    "warm_early_february": WARM_EARLY_FEBRUARY,
    "occupied_high_co2": OCCUPIED_HIGH_CO2,
    "occupied_high_co2_strict": OCCUPIED_HIGH_CO2_STRICT,
    "type_listing": TYPE_LISTING,
    "ordered_warm_join": ORDERED_WARM_JOIN,
}
