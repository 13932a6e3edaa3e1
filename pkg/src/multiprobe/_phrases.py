"""Shared confidence vocabulary used by probing, emission, and the mock backend."""

SURE_PHRASE = "I am sure"
UNSURE_PHRASE = "I am unsure"

CERTAINTY_QUESTION = (
    "Are you sure you accurately answered the question based on your internal knowledge?"
)
