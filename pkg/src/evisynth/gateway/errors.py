"""Gateway error taxonomy."""

from __future__ import annotations

from ..errors import EviSynthError


class TemplateError(EviSynthError):
    code = "template_error"


class MissingSlot(TemplateError):
    """A placeholder in the template body was not bound at render time."""

    code = "missing_slot"

    def __init__(self, name: str):
        super().__init__(f"slot {name!r} is not bound", detail=name)
        self.name = name


class UnknownSlot(TemplateError):
    """A slot was provided that does not appear in the template body."""

    code = "unknown_slot"

    def __init__(self, name: str):
        super().__init__(f"slot {name!r} does not appear in the template", detail=name)
        self.name = name


class UnknownTemplate(TemplateError):
    code = "unknown_template"

    def __init__(self, template_id: str):
        super().__init__(f"no template registered with id {template_id!r}", detail=template_id)
        self.template_id = template_id


class TransportFailure(EviSynthError):
    """Transient transport problem; the gateway retries these."""

    code = "transport_failure"


class ProviderUnavailable(EviSynthError):
    code = "provider_unavailable"


class UnscriptedPrompt(ProviderUnavailable):
    """Mock provider got a (template_id, fingerprint) it has no script for."""

    code = "unscripted_prompt"

    def __init__(self, template_id: str, fingerprint: str):
        super().__init__(
            f"no scripted response for template {template_id!r} fingerprint {fingerprint[:12]}…",
            detail={"template_id": template_id, "fingerprint": fingerprint},
        )
        self.template_id = template_id
        self.fingerprint = fingerprint


class AuthFailure(EviSynthError):
    code = "auth_failure"


class BudgetExceeded(EviSynthError):
    code = "budget_exceeded"


class StructureError(EviSynthError):
    code = "structure_error"


class MissingSection(StructureError):
    code = "missing_section"

    def __init__(self, tag: str):
        super().__init__(f"expected section {tag!r} not found", detail=tag)
        self.tag = tag


class DuplicateSection(StructureError):
    code = "duplicate_section"

    def __init__(self, tag: str):
        super().__init__(f"section {tag!r} appears more than once", detail=tag)
        self.tag = tag


class DuplicateScriptKey(EviSynthError):
    code = "duplicate_script_key"

    def __init__(self, key: tuple[str, str]):
        super().__init__(
            f"conflicting script entry for template {key[0]!r} fingerprint {key[1][:12]}…",
            detail=list(key),
        )
        self.key = key


class LlmOutputUnparseable(EviSynthError):
    """Model output violated a stage's output contract even after the one
    corrective re-prompt allowed by policy."""

    code = "llm_output_unparseable"
