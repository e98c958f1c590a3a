"""Structural HTML checker and section extractor used as the export oracle."""

from html.parser import HTMLParser


class StructuredHTML(HTMLParser):
    """Well-formedness checker + section extractor for the export document."""

    VOID = {"meta", "br", "hr", "img", "input", "link"}

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.stack = []
        self.errors = []
        self.saw_doctype = False
        self.headings = []          # (tag, text)
        self.sections = {}          # h2 text -> list of li texts / paragraph
        self._current_h2 = None
        self._capture = None        # ("heading", tag) | ("li",) | ("p",)
        self._buffer = []

    def handle_decl(self, decl):
        if decl.lower().startswith("doctype html"):
            self.saw_doctype = True

    def handle_starttag(self, tag, attrs):
        if tag in self.VOID:
            return
        self.stack.append(tag)
        if tag in ("h1", "h2", "h3"):
            self._capture = ("heading", tag)
            self._buffer = []
        elif tag == "li":
            self._capture = ("li",)
            self._buffer = []
        elif tag == "p" and self._current_h2 is not None:
            self._capture = ("p",)
            self._buffer = []

    def handle_endtag(self, tag):
        if tag in self.VOID:
            return
        if not self.stack or self.stack[-1] != tag:
            self.errors.append(f"unbalanced </{tag}> (stack: {self.stack[-3:]})")
            return
        self.stack.pop()
        text = "".join(self._buffer).strip()
        if self._capture and self._capture[0] == "heading" and tag == self._capture[1]:
            self.headings.append((tag, text))
            if tag == "h2":
                self._current_h2 = text
                self.sections[text] = []
            else:
                self._current_h2 = None
        elif self._capture == ("li",) and tag == "li":
            if self._current_h2 is not None:
                self.sections[self._current_h2].append(text)
        elif self._capture == ("p",) and tag == "p":
            self.sections[self._current_h2].append(text)
        self._capture = None

    def handle_data(self, data):
        if self._capture:
            self._buffer.append(data)

    @classmethod
    def check(cls, html_doc):
        parser = cls()
        parser.feed(html_doc)
        parser.close()
        assert parser.saw_doctype, "missing <!DOCTYPE html>"
        assert parser.stack == [], f"unclosed tags: {parser.stack}"
        assert parser.errors == [], parser.errors
        return parser
