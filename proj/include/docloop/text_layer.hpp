#pragma once

#include <string>
#include <vector>

#include "docloop/model.hpp"

namespace docloop {

// One positioned run of text in top-left page coordinates (PDF points).
struct TextRun {
  std::string text;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // y0 = top, y1 = baseline-ish bottom
  double font_size = 0;
};

struct PageText {
  double width = 612.0;
  double height = 792.0;
  std::vector<TextRun> runs;
};

// A visual line: runs sharing a baseline, merged left to right.
struct TextLine {
  std::string text;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double font_size = 0;
};

// A group of consecutive lines separated from its neighbours by vertical
// whitespace or a font-size change.
struct Paragraph {
  std::vector<TextLine> lines;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double font_size = 0;

  std::string text() const;  // lines joined with single spaces
};

std::vector<TextLine> group_lines(const PageText& page);
std::vector<Paragraph> group_paragraphs(const std::vector<TextLine>& lines);

// Text of the lines whose centre lies inside `box`, in reading order.
std::string text_in_box(const PageText& page, const BoundingBox& box);

// Font size carrying the most characters, the smaller size on a tie (0 for
// an empty page).
double body_font_size(const std::vector<TextLine>& lines);

}  // namespace docloop
