#include "docloop/pdf_reader.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cmath>
#include <cstring>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>

#include "docloop/error.hpp"

namespace docloop::pdf {

namespace {

bool is_ws(char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '\f' || c == '\0'; }

bool is_delim(char c) {
  return c == '(' || c == ')' || c == '<' || c == '>' || c == '[' || c == ']' || c == '{' || c == '}' || c == '/' ||
         c == '%';
}

bool is_regular(char c) { return !is_ws(c) && !is_delim(c); }

struct Object {
  enum class Kind { Null, Bool, Number, String, Name, Array, Dict, Ref, Keyword };
  Kind kind = Kind::Null;
  bool boolean = false;
  double number = 0;
  std::string text;  // String, Name, Keyword
  std::vector<Object> items;
  std::vector<std::pair<std::string, Object>> entries;
  int ref_num = 0;
  int ref_gen = 0;

  const Object* get(std::string_view key) const {
    for (const auto& [k, v] : entries) {
      if (k == key) return &v;
    }
    return nullptr;
  }
  bool is(Kind k) const { return kind == k; }
  bool is_name(std::string_view n) const { return kind == Kind::Name && text == n; }
};

struct Indirect {
  Object value;
  std::string stream;  // raw (still encoded) stream bytes
  bool has_stream = false;
};

class Lexer {
 public:
  explicit Lexer(std::string_view s, std::size_t pos = 0) : s_(s), pos_(pos) {}

  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }
  bool eof() { skip_ws(); return pos_ >= s_.size(); }
  std::string_view source() const { return s_; }

  void skip_ws() {
    while (pos_ < s_.size()) {
      char c = s_[pos_];
      if (is_ws(c)) {
        ++pos_;
      } else if (c == '%') {
        while (pos_ < s_.size() && s_[pos_] != '\n' && s_[pos_] != '\r') ++pos_;
      } else {
        break;
      }
    }
  }

  // Parses one object. Keywords (operators, "stream", "endobj", ...) come back
  // as Kind::Keyword. `allow_refs` enables "N G R" lookahead.
  Object parse(bool allow_refs, int depth = 0) {
    if (depth > 256) throw format_error("pdf object nesting too deep");
    skip_ws();
    if (pos_ >= s_.size()) throw format_error("unexpected end of pdf data");
    char c = s_[pos_];
    Object o;
    if (c == '<' && peek(1) == '<') {
      pos_ += 2;
      o.kind = Object::Kind::Dict;
      while (true) {
        skip_ws();
        if (pos_ >= s_.size()) throw format_error("unterminated dictionary");
        if (s_[pos_] == '>' && peek(1) == '>') {
          pos_ += 2;
          break;
        }
        Object key = parse(allow_refs, depth + 1);
        if (!key.is(Object::Kind::Name)) throw format_error("dictionary key is not a name");
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == '>' && peek(1) == '>') {
          o.entries.emplace_back(key.text, Object{});
          continue;
        }
        o.entries.emplace_back(key.text, parse(allow_refs, depth + 1));
      }
      return o;
    }
    if (c == '[') {
      ++pos_;
      o.kind = Object::Kind::Array;
      while (true) {
        skip_ws();
        if (pos_ >= s_.size()) throw format_error("unterminated array");
        if (s_[pos_] == ']') {
          ++pos_;
          break;
        }
        o.items.push_back(parse(allow_refs, depth + 1));
      }
      return o;
    }
    if (c == '(') {
      o.kind = Object::Kind::String;
      o.text = literal_string();
      return o;
    }
    if (c == '<') {
      o.kind = Object::Kind::String;
      o.text = hex_string();
      return o;
    }
    if (c == '/') {
      ++pos_;
      o.kind = Object::Kind::Name;
      while (pos_ < s_.size() && is_regular(s_[pos_])) {
        if (s_[pos_] == '#' && pos_ + 2 < s_.size() && std::isxdigit(static_cast<unsigned char>(s_[pos_ + 1])) &&
            std::isxdigit(static_cast<unsigned char>(s_[pos_ + 2]))) {
          o.text.push_back(static_cast<char>(std::stoi(std::string(s_.substr(pos_ + 1, 2)), nullptr, 16)));
          pos_ += 3;
        } else {
          o.text.push_back(s_[pos_++]);
        }
      }
      return o;
    }
    if (c == ')' || c == '>' || c == ']' || c == '}' || c == '{') {
      ++pos_;
      o.kind = Object::Kind::Keyword;
      o.text = std::string(1, c);
      return o;
    }
    std::size_t start = pos_;
    while (pos_ < s_.size() && is_regular(s_[pos_])) ++pos_;
    std::string_view tok = s_.substr(start, pos_ - start);
    if (auto num = to_number(tok)) {
      o.kind = Object::Kind::Number;
      o.number = *num;
      if (allow_refs && is_integer(tok)) {
        std::size_t save = pos_;
        skip_ws();
        std::size_t gen_start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (pos_ > gen_start) {
          std::string_view gen = s_.substr(gen_start, pos_ - gen_start);
          skip_ws();
          if (pos_ < s_.size() && s_[pos_] == 'R' && (pos_ + 1 >= s_.size() || !is_regular(s_[pos_ + 1]))) {
            ++pos_;
            o.kind = Object::Kind::Ref;
            o.ref_num = static_cast<int>(*num);
            o.ref_gen = std::stoi(std::string(gen));
            return o;
          }
        }
        pos_ = save;
      }
      return o;
    }
    if (tok == "true" || tok == "false") {
      o.kind = Object::Kind::Bool;
      o.boolean = tok == "true";
      return o;
    }
    if (tok == "null") return o;
    o.kind = Object::Kind::Keyword;
    o.text = std::string(tok);
    return o;
  }

 private:
  char peek(std::size_t ahead) const { return pos_ + ahead < s_.size() ? s_[pos_ + ahead] : '\0'; }

  static bool is_integer(std::string_view tok) {
    std::size_t i = (tok[0] == '+' || tok[0] == '-') ? 1 : 0;
    if (i >= tok.size()) return false;
    for (; i < tok.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(tok[i]))) return false;
    }
    return true;
  }

  static std::optional<double> to_number(std::string_view tok) {
    if (tok.empty()) return std::nullopt;
    bool digit = false;
    for (std::size_t i = 0; i < tok.size(); ++i) {
      char c = tok[i];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        digit = true;
      } else if (!(c == '.' || ((c == '+' || c == '-') && i == 0))) {
        return std::nullopt;
      }
    }
    if (!digit) return std::nullopt;
    try {
      return std::stod(std::string(tok));
    } catch (...) {
      return std::nullopt;
    }
  }

  std::string literal_string() {
    ++pos_;  // '('
    std::string out;
    int depth = 1;
    while (pos_ < s_.size()) {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        char e = s_[pos_++];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 'r': out.push_back('\r'); break;
          case 't': out.push_back('\t'); break;
          case 'b': out.push_back('\b'); break;
          case 'f': out.push_back('\f'); break;
          case '\r':
            if (pos_ < s_.size() && s_[pos_] == '\n') ++pos_;
            break;
          case '\n': break;
          default:
            if (e >= '0' && e <= '7') {
              int value = e - '0';
              for (int k = 0; k < 2 && pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '7'; ++k) {
                value = value * 8 + (s_[pos_++] - '0');
              }
              out.push_back(static_cast<char>(value & 0xFF));
            } else {
              out.push_back(e);
            }
        }
      } else if (c == '(') {
        ++depth;
        out.push_back(c);
      } else if (c == ')') {
        if (--depth == 0) return out;
        out.push_back(c);
      } else {
        out.push_back(c);
      }
    }
    throw format_error("unterminated string literal");
  }

  std::string hex_string() {
    ++pos_;  // '<'
    std::string digits;
    while (pos_ < s_.size() && s_[pos_] != '>') {
      char c = s_[pos_++];
      if (std::isxdigit(static_cast<unsigned char>(c))) digits.push_back(c);
    }
    if (pos_ >= s_.size()) throw format_error("unterminated hex string");
    ++pos_;
    if (digits.size() % 2) digits.push_back('0');
    std::string out;
    for (std::size_t i = 0; i < digits.size(); i += 2) {
      out.push_back(static_cast<char>(std::stoi(digits.substr(i, 2), nullptr, 16)));
    }
    return out;
  }

  std::string_view s_;
  std::size_t pos_;
};

std::string inflate_bytes(std::string_view in) {
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw format_error("zlib init failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  std::string out;
  std::array<char, 16384> buf{};
  int rc = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf.data());
    zs.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END && rc != Z_BUF_ERROR) {
      inflateEnd(&zs);
      throw format_error("corrupt FlateDecode stream");
    }
    out.append(buf.data(), buf.size() - zs.avail_out);
    if (rc == Z_BUF_ERROR && zs.avail_in == 0) break;
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

std::string ascii_hex_decode(std::string_view in) {
  std::string digits;
  for (char c : in) {
    if (c == '>') break;
    if (std::isxdigit(static_cast<unsigned char>(c))) digits.push_back(c);
  }
  if (digits.size() % 2) digits.push_back('0');
  std::string out;
  for (std::size_t i = 0; i < digits.size(); i += 2) {
    out.push_back(static_cast<char>(std::stoi(digits.substr(i, 2), nullptr, 16)));
  }
  return out;
}

std::string ascii85_decode(std::string_view in) {
  std::string out;
  std::uint32_t group = 0;
  int n = 0;
  auto pos = in.find("<~");
  if (pos != std::string_view::npos) in.remove_prefix(pos + 2);
  for (char c : in) {
    if (c == '~') break;
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    if (c == 'z' && n == 0) {
      out.append(4, '\0');
      continue;
    }
    if (c < '!' || c > 'u') throw format_error("corrupt ASCII85Decode stream");
    group = group * 85 + static_cast<std::uint32_t>(c - '!');
    if (++n == 5) {
      for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((group >> shift) & 0xFF));
      group = 0;
      n = 0;
    }
  }
  if (n == 1) throw format_error("corrupt ASCII85Decode stream");
  if (n > 1) {
    for (int i = n; i < 5; ++i) group = group * 85 + 84;
    for (int i = 0; i < n - 1; ++i) out.push_back(static_cast<char>((group >> (24 - 8 * i)) & 0xFF));
  }
  return out;
}

std::string latin1_to_utf8(std::string_view in) {
  std::string out;
  for (unsigned char c : in) {
    if (c < 0x20) {
      if (c == '\t') out.push_back(' ');
      continue;
    }
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {
    if (bytes.substr(0, std::min<std::size_t>(bytes.size(), 1024)).find("%PDF-") == std::string_view::npos) {
      throw format_error("missing %PDF- header");
    }
    scan_objects();
    expand_object_streams();
  }

  PdfContent content() {
    PdfContent out;
    const Object* root = find_root();
    if (!root) throw format_error("pdf has no document catalog");
    const Object* pages = resolve(root->get("Pages"));
    if (!pages || !pages->is(Object::Kind::Dict)) throw format_error("pdf catalog has no page tree");
    std::set<int> visited;
    collect_pages(*pages, std::nullopt, visited, 0, out);
    return out;
  }

 private:
  void scan_objects() {
    std::size_t pos = 0;
    while ((pos = bytes_.find("obj", pos)) != std::string_view::npos) {
      std::size_t kw = pos;
      pos += 3;
      if (pos < bytes_.size() && is_regular(bytes_[pos])) continue;
      auto header = object_header_before(kw);
      if (!header) continue;
      try {
        Lexer lex(bytes_, pos);
        Indirect ind;
        ind.value = lex.parse(true);
        std::size_t after = lex.pos();
        Lexer probe(bytes_, after);
        probe.skip_ws();
        if (bytes_.compare(probe.pos(), 6, "stream") == 0) {
          std::size_t data = probe.pos() + 6;
          if (data < bytes_.size() && bytes_[data] == '\r') ++data;
          if (data < bytes_.size() && bytes_[data] == '\n') ++data;
          std::size_t end = std::string_view::npos;
          if (const Object* len = ind.value.get("Length"); len && len->is(Object::Kind::Number)) {
            std::size_t n = static_cast<std::size_t>(len->number);
            if (data + n <= bytes_.size()) {
              Lexer check(bytes_, data + n);
              check.skip_ws();
              if (bytes_.compare(check.pos(), 9, "endstream") == 0) end = data + n;
            }
          }
          if (end == std::string_view::npos) {
            std::size_t found = bytes_.find("endstream", data);
            if (found == std::string_view::npos) throw format_error("unterminated stream");
            end = found;
            while (end > data && (bytes_[end - 1] == '\n' || bytes_[end - 1] == '\r')) --end;
          }
          ind.stream = std::string(bytes_.substr(data, end - data));
          ind.has_stream = true;
          pos = bytes_.find("endstream", end);
          if (pos == std::string_view::npos) pos = bytes_.size();
        } else {
          pos = after;
        }
        objects_[header->first] = std::move(ind);
      } catch (const Error&) {
        // unparsable object body: skip it, a later revision may redefine it
      }
    }
    if (objects_.empty()) throw format_error("no pdf objects found");
  }

  std::optional<std::pair<int, int>> object_header_before(std::size_t kw) const {
    auto read_back_int = [&](std::size_t& i) -> std::optional<int> {
      while (i > 0 && is_ws(bytes_[i - 1])) --i;
      std::size_t end = i;
      while (i > 0 && std::isdigit(static_cast<unsigned char>(bytes_[i - 1]))) --i;
      if (i == end || end - i > 10) return std::nullopt;
      return std::stoi(std::string(bytes_.substr(i, end - i)));
    };
    std::size_t i = kw;
    if (i == 0 || !is_ws(bytes_[i - 1])) return std::nullopt;
    auto gen = read_back_int(i);
    if (!gen) return std::nullopt;
    if (i == 0 || !is_ws(bytes_[i - 1])) return std::nullopt;
    auto num = read_back_int(i);
    if (!num) return std::nullopt;
    if (i > 0 && is_regular(bytes_[i - 1])) return std::nullopt;
    return std::make_pair(*num, *gen);
  }

  void expand_object_streams() {
    std::vector<std::pair<int, Indirect>> found;
    for (auto& [num, ind] : objects_) {
      if (!ind.has_stream || !ind.value.get("Type") || !ind.value.get("Type")->is_name("ObjStm")) continue;
      std::string data;
      try {
        data = decode_stream(ind);
      } catch (const Error&) {
        continue;
      }
      const Object* n = ind.value.get("N");
      const Object* first = ind.value.get("First");
      if (!n || !first) continue;
      Lexer header(data);
      std::vector<std::pair<int, std::size_t>> offsets;
      for (int k = 0; k < static_cast<int>(n->number); ++k) {
        Object id = header.parse(false);
        Object off = header.parse(false);
        offsets.emplace_back(static_cast<int>(id.number), static_cast<std::size_t>(off.number));
      }
      for (auto [id, off] : offsets) {
        Lexer body(data, static_cast<std::size_t>(first->number) + off);
        Indirect child;
        child.value = body.parse(true);
        found.emplace_back(id, std::move(child));
      }
    }
    for (auto& [id, child] : found) objects_.try_emplace(id, std::move(child));
  }

  const Object* resolve(const Object* o, int hops = 0) const {
    while (o && o->is(Object::Kind::Ref)) {
      if (++hops > 32) return nullptr;
      auto it = objects_.find(o->ref_num);
      if (it == objects_.end()) return nullptr;
      o = &it->second.value;
    }
    return o;
  }

  const Indirect* indirect(const Object* o) const {
    if (!o || !o->is(Object::Kind::Ref)) return nullptr;
    auto it = objects_.find(o->ref_num);
    return it == objects_.end() ? nullptr : &it->second;
  }

  std::string decode_stream(const Indirect& ind) const {
    std::string data = ind.stream;
    const Object* filter = resolve(ind.value.get("Filter"));
    std::vector<std::string> filters;
    if (filter && filter->is(Object::Kind::Name)) {
      filters.push_back(filter->text);
    } else if (filter && filter->is(Object::Kind::Array)) {
      for (const auto& f : filter->items) {
        if (f.is(Object::Kind::Name)) filters.push_back(f.text);
      }
    }
    for (const auto& f : filters) {
      if (f == "FlateDecode" || f == "Fl") {
        data = inflate_bytes(data);
      } else if (f == "ASCIIHexDecode" || f == "AHx") {
        data = ascii_hex_decode(data);
      } else if (f == "ASCII85Decode" || f == "A85") {
        data = ascii85_decode(data);
      } else {
        throw format_error("unsupported stream filter " + f);
      }
    }
    return data;
  }

  const Object* find_root() const {
    std::size_t t = bytes_.rfind("trailer");
    while (t != std::string_view::npos) {
      try {
        Lexer lex(bytes_, t + 7);
        Object trailer = lex.parse(true);
        if (const Object* root = resolve(trailer.get("Root")); root && root->is(Object::Kind::Dict)) return root;
      } catch (const Error&) {
      }
      if (t == 0) break;
      t = bytes_.rfind("trailer", t - 1);
    }
    for (auto it = objects_.rbegin(); it != objects_.rend(); ++it) {
      const Object* type = it->second.value.get("Type");
      if (type && type->is_name("XRef")) {
        if (const Object* root = resolve(it->second.value.get("Root")); root && root->is(Object::Kind::Dict))
          return root;
      }
    }
    for (const auto& [num, ind] : objects_) {
      const Object* type = ind.value.get("Type");
      if (type && type->is_name("Catalog")) return &ind.value;
    }
    return nullptr;
  }

  void collect_pages(const Object& node, std::optional<std::array<double, 4>> inherited_box, std::set<int>& visited,
                     int depth, PdfContent& out) {
    if (depth > 64) throw format_error("page tree too deep");
    std::optional<std::array<double, 4>> box = inherited_box;
    if (const Object* mb = resolve(node.get("MediaBox")); mb && mb->is(Object::Kind::Array) && mb->items.size() == 4) {
      std::array<double, 4> b{};
      for (int i = 0; i < 4; ++i) {
        const Object* v = resolve(&mb->items[i]);
        b[i] = v && v->is(Object::Kind::Number) ? v->number : 0.0;
      }
      box = b;
    }
    const Object* type = node.get("Type");
    const Object* kids = resolve(node.get("Kids"));
    bool is_page = (type && type->is_name("Page")) || (!kids && node.get("Contents"));
    if (is_page) {
      std::array<double, 4> b = box.value_or(std::array<double, 4>{0, 0, 612, 792});
      PageText page;
      page.width = std::abs(b[2] - b[0]);
      page.height = std::abs(b[3] - b[1]);
      if (page.width <= 0 || page.height <= 0) throw format_error("page with empty MediaBox");
      interpret_page(node, std::min(b[0], b[2]), std::min(b[1], b[3]), page);
      out.pages.push_back(std::move(page));
      return;
    }
    if (!kids || !kids->is(Object::Kind::Array)) return;
    for (const auto& kid : kids->items) {
      if (kid.is(Object::Kind::Ref) && !visited.insert(kid.ref_num).second) continue;
      const Object* child = resolve(&kid);
      if (child && child->is(Object::Kind::Dict)) collect_pages(*child, box, visited, depth + 1, out);
    }
  }

  void interpret_page(const Object& page, double origin_x, double origin_y, PageText& out) const {
    const Object* contents = page.get("Contents");
    std::vector<const Object*> parts;
    if (contents && contents->is(Object::Kind::Ref)) {
      const Object* target = resolve(contents);
      if (target && target->is(Object::Kind::Array)) {
        for (const auto& item : target->items) parts.push_back(&item);
      } else {
        parts.push_back(contents);
      }
    } else if (contents && contents->is(Object::Kind::Array)) {
      for (const auto& item : contents->items) parts.push_back(&item);
    }
    std::string program;
    for (const Object* part : parts) {
      const Indirect* ind = indirect(part);
      if (!ind || !ind->has_stream) continue;
      try {
        program += decode_stream(*ind);
        program.push_back('\n');
      } catch (const Error&) {
        // undecodable content contributes no text
      }
    }
    run_content(program, origin_x, origin_y, out);
  }

  struct Matrix {
    double a = 1, b = 0, c = 0, d = 1, e = 0, f = 0;
    Matrix operator*(const Matrix& m) const {
      return {a * m.a + b * m.c,       a * m.b + b * m.d,       c * m.a + d * m.c,
              c * m.b + d * m.d,       e * m.a + f * m.c + m.e, e * m.b + f * m.d + m.f};
    }
  };

  static void run_content(std::string_view program, double origin_x, double origin_y, PageText& out) {
    Lexer lex(program);
    std::vector<Object> operands;
    Matrix ctm;
    std::vector<Matrix> ctm_stack;
    Matrix tm, tlm;
    double font_size = 12, leading = 0, rise = 0;

    auto num = [&](std::size_t i) {
      return i < operands.size() && operands[i].is(Object::Kind::Number) ? operands[i].number : 0.0;
    };
    auto next_line = [&](double tx, double ty) {
      tlm = Matrix{1, 0, 0, 1, tx, ty} * tlm;
      tm = tlm;
    };
    auto show = [&](const std::string& raw, double adjust_units) {
      std::string text = latin1_to_utf8(raw);
      double advance = static_cast<double>(raw.size()) * 0.5 * font_size - adjust_units / 1000.0 * font_size;
      Matrix trm = Matrix{1, 0, 0, 1, 0, rise} * tm * ctm;
      double scale_y = std::hypot(trm.c, trm.d);
      double scale_x = std::hypot(trm.a, trm.b);
      double size = font_size * scale_y;
      double x = trm.e - origin_x;
      double baseline = out.height - (trm.f - origin_y);
      if (!text.empty() && text.find_first_not_of(' ') != std::string::npos) {
        TextRun run;
        run.text = std::move(text);
        run.font_size = size;
        run.x0 = std::max(0.0, x);
        run.x1 = std::max(run.x0 + 0.01, x + advance * scale_x);
        run.y0 = std::max(0.0, baseline - 0.8 * size);
        run.y1 = std::max(run.y0 + 0.01, baseline + 0.2 * size);
        out.runs.push_back(std::move(run));
      }
      tm = Matrix{1, 0, 0, 1, advance, 0} * tm;
    };

    while (!lex.eof()) {
      Object o;
      try {
        o = lex.parse(false);
      } catch (const Error&) {
        break;
      }
      if (!o.is(Object::Kind::Keyword)) {
        operands.push_back(std::move(o));
        continue;
      }
      const std::string& op = o.text;
      if (op == "BI") {
        // inline image: skip to EI
        std::size_t ei = program.find("EI", lex.pos());
        if (ei == std::string_view::npos) break;
        lex.seek(ei + 2);
      } else if (op == "q") {
        ctm_stack.push_back(ctm);
      } else if (op == "Q") {
        if (!ctm_stack.empty()) {
          ctm = ctm_stack.back();
          ctm_stack.pop_back();
        }
      } else if (op == "cm") {
        ctm = Matrix{num(0), num(1), num(2), num(3), num(4), num(5)} * ctm;
      } else if (op == "BT") {
        tm = tlm = Matrix{};
      } else if (op == "Tf") {
        font_size = num(1);
      } else if (op == "TL") {
        leading = num(0);
      } else if (op == "Ts") {
        rise = num(0);
      } else if (op == "Td") {
        next_line(num(0), num(1));
      } else if (op == "TD") {
        leading = -num(1);
        next_line(num(0), num(1));
      } else if (op == "Tm") {
        tlm = tm = Matrix{num(0), num(1), num(2), num(3), num(4), num(5)};
      } else if (op == "T*") {
        next_line(0, -leading);
      } else if (op == "Tj") {
        if (!operands.empty() && operands.back().is(Object::Kind::String)) show(operands.back().text, 0);
      } else if (op == "'" || op == "\"") {
        next_line(0, -leading);
        if (!operands.empty() && operands.back().is(Object::Kind::String)) show(operands.back().text, 0);
      } else if (op == "TJ") {
        if (!operands.empty() && operands.back().is(Object::Kind::Array)) {
          std::string joined;
          double adjust = 0;
          for (const auto& item : operands.back().items) {
            if (item.is(Object::Kind::String)) {
              joined += item.text;
            } else if (item.is(Object::Kind::Number)) {
              if (item.number < -200) joined.push_back(' ');
              adjust += item.number;
            }
          }
          show(joined, adjust);
        }
      }
      operands.clear();
    }
  }

  std::string_view bytes_;
  std::map<int, Indirect> objects_;
};

}  // namespace

PdfContent read_pdf(std::string_view bytes) {
  Reader reader(bytes);
  PdfContent content = reader.content();
  if (content.pages.empty()) throw Error(ErrorCode::Invalid, "pdf has no pages", {{"kind", "empty_document"}});
  return content;
}

bool looks_like_pdf(std::string_view bytes) {
  try {
    read_pdf(bytes);
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace docloop::pdf
