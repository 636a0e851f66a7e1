import pytest

from hage_ingest import QaItem, Turn


@pytest.fixture
def dialogue():
    return [
        Turn("Alice", "I moved to Lisbon in 2021 because my company opened "
                      "an office there.", timestamp=100, session=0),
        Turn("Bob", "Lisbon sounds great. I visited Portugal last summer.",
             timestamp=160, session=0),
        Turn("Alice", "The office move led to a promotion for me in March.",
             timestamp=220, session=0),
        Turn("Bob", "Congratulations on the promotion, Alice.",
             timestamp=5000, session=1),
        Turn("Alice", "Thanks. My sister Carol also works in Lisbon now.",
             timestamp=5060, session=1),
    ]


@pytest.fixture
def qa():
    return [
        QaItem("q0", "When did Alice move to Lisbon?", "2021"),
        QaItem("q1", "Who also works in Lisbon?", "Carol"),
        QaItem("q2", "What is the airspeed of an unladen swallow?",
               "twenty four miles per hour"),
    ]
