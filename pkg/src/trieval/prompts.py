"""Few-shot prompt assembly.

One block layout serves both directions: demonstration blocks of
(query, identifier) pairs followed by a final block whose answer line is left
open for the LM to complete. The same template is used verbatim for indexing
and retrieval; a second template with document/question labels drives
pseudo-query generation when no query file is supplied.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PromptTemplate:
    """Ordered demonstration pairs plus a slot for the new query."""

    demonstrations: tuple[tuple[str, str], ...]
    query_label: str = "Query"
    answer_label: str = "Identifier"

    def render(self, query_text: str) -> str:
        if not query_text:
            raise ValueError("query_text must be non-empty")
        blocks = []
        for i, (query, answer) in enumerate(self.demonstrations, start=1):
            blocks.append(
                f"Example{i}:\n{self.query_label}: {query}\n{self.answer_label}: {answer}"
            )
        blocks.append(
            f"Example{len(self.demonstrations) + 1}:\n"
            f"{self.query_label}: {query_text}\n"
            f"{self.answer_label}:"
        )
        return "\n\n".join(blocks)


def build_prompt(template: PromptTemplate, query_text: str) -> str:
    return template.render(query_text)


#: demonstration pairs used for both docid minting and retrieval
DEFAULT_INDEX_TEMPLATE = PromptTemplate(
    demonstrations=(
        ("Provide list of the olympic games?", "olympic-games-list"),
        ("What is minority interest in accounting?", "subsidiary-corporation-parent"),
        ("How does photosynthesis work in plants?", "photosynthesis-plant-process"),
    )
)

#: fallback template for generating pseudo queries from document text
DEFAULT_QUERY_GEN_TEMPLATE = PromptTemplate(
    demonstrations=(
        (
            "The Eiffel Tower is a wrought-iron lattice tower on the Champ de Mars"
            " in Paris, France. It is named after the engineer Gustave Eiffel,"
            " whose company designed and built the tower.",
            "Who designed the Eiffel Tower?",
        ),
        (
            "Water boils at 100 degrees Celsius at standard atmospheric pressure."
            " The boiling point decreases as altitude increases because the"
            " surrounding pressure drops.",
            "At what temperature does water boil at sea level?",
        ),
    ),
    query_label="Document",
    answer_label="Question",
)
