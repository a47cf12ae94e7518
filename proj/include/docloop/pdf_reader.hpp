#pragma once

#include <string_view>
#include <vector>

#include "docloop/text_layer.hpp"

namespace docloop::pdf {

// Parsed view of a digitally-native PDF: page geometry and the positioned
// text layer of every page, in page-tree order.
//
// Supports classic and cross-reference-stream files, object streams,
// FlateDecode content, literal/hex strings and the common text operators
// (Tf Td TD Tm T* TL Tj TJ ' " cm q Q). Glyph widths are estimated from the
// font size; encodings are read as Latin-1.
struct PdfContent {
  std::vector<PageText> pages;
};

// Throws a format error when the bytes are not a readable PDF.
PdfContent read_pdf(std::string_view bytes);

// Cheap structural check: header present and a page tree reachable.
bool looks_like_pdf(std::string_view bytes);

}  // namespace docloop::pdf
