#include "artrecon/artcode.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "artrecon/error.hpp"
#include "artrecon/numfmt.hpp"

namespace artrecon {

std::string_view to_string(Dialect dialect) {
  switch (dialect) {
    case Dialect::EdgeAxis: return "edge-axis";
    case Dialect::AbsoluteNumeric: return "absolute";
    case Dialect::RelativeToCenter: return "center-offset";
  }
  return "unknown";
}

Dialect dialect_from_string(std::string_view text) {
  if (text == "edge-axis") return Dialect::EdgeAxis;
  if (text == "absolute") return Dialect::AbsoluteNumeric;
  if (text == "center-offset") return Dialect::RelativeToCenter;
  throw Error(ErrorCode::InvalidArgument, "unknown dialect '" + std::string(text) + "'");
}

Dialect dialect_of(const JointLine& line) {
  switch (line.index()) {
    case 0: return Dialect::EdgeAxis;
    case 1: return Dialect::AbsoluteNumeric;
    default: return Dialect::RelativeToCenter;
  }
}

int parent_of(const JointLine& line) {
  return std::visit([](const auto& j) { return j.parent; }, line);
}
int child_of(const JointLine& line) {
  return std::visit([](const auto& j) { return j.child; }, line);
}
JointType type_of(const JointLine& line) {
  return std::visit([](const auto& j) { return j.type; }, line);
}

// ---------------------------------------------------------------------------
// Emitter

namespace {

std::string vec_text(const Vec3& v) {
  return "[" + format_fixed4(v.x()) + ", " + format_fixed4(v.y()) + ", " + format_fixed4(v.z()) + "]";
}

std::string sign_text(int s) { return s < 0 ? "-1" : "+1"; }

void check_index(int axis_idx) {
  if (axis_idx < 0 || axis_idx > 2) {
    throw Error(ErrorCode::InvalidAxisIndex, "axis index " + std::to_string(axis_idx) + " not in {0,1,2}");
  }
}

std::string box_line(std::size_t index, const BoxEntry& box) {
  std::string out = "bbox_" + std::to_string(index) + " = OBB(center=" + vec_text(box.center) + ", R=[";
  for (int r = 0; r < 3; ++r) {
    if (r) out += ", ";
    out += vec_text(box.rotation.row(r).transpose());
  }
  return out + "], half=" + vec_text(box.half) + ")\n";
}

std::string joint_head(JointType type, int parent, int child) {
  return "Joint(type=\"" + std::string(to_string(type)) + "\", parent=" + std::to_string(parent) +
         ", child=" + std::to_string(child);
}

std::string axis_call(int child, int axis_idx, int axis_sign) {
  check_index(axis_idx);
  return "axis=Axis(box=" + std::to_string(child) + ", idx=" + std::to_string(axis_idx) + ", sign=" + sign_text(axis_sign) + ")";
}

struct LineEmitter {
  std::string operator()(const RelativeJoint& j) const {
    std::string out = joint_head(j.type, j.parent, j.child) + ", " + axis_call(j.child, j.axis_idx, j.axis_sign);
    if (j.type == JointType::Revolute) {
      if (!j.edge_signs) throw Error(ErrorCode::MissingPivot, "revolute joint without edge selection");
      out += ", pivot=Edge(s1=" + sign_text((*j.edge_signs)[0]) + ", s2=" + sign_text((*j.edge_signs)[1]) + ")";
    }
    return out + "),";
  }
  std::string operator()(const AbsoluteJoint& j) const {
    std::string out = joint_head(j.type, j.parent, j.child) + ", axis=" + vec_text(j.axis);
    if (j.type == JointType::Revolute) {
      if (!j.position) throw Error(ErrorCode::MissingPivot, "revolute joint without position");
      out += ", pos=" + vec_text(*j.position);
    }
    return out + "),";
  }
  std::string operator()(const CenterOffsetJoint& j) const {
    std::string out = joint_head(j.type, j.parent, j.child) + ", " + axis_call(j.child, j.axis_idx, j.axis_sign);
    if (j.type == JointType::Revolute) {
      if (!j.offset) throw Error(ErrorCode::MissingPivot, "revolute joint without offset");
      out += ", offset=[" + format_fixed4((*j.offset)[0]) + ", " + format_fixed4((*j.offset)[1]) + "]";
    }
    return out + "),";
  }
};

std::string box_lines(std::span<const BoxEntry> boxes) {
  std::string out;
  for (std::size_t i = 0; i < boxes.size(); ++i) out += box_line(i, boxes[i]);
  return out;
}

}  // namespace

std::string emit_prompt(std::span<const BoxEntry> boxes) {
  if (boxes.empty()) throw Error(ErrorCode::EmptyInput, "prompt needs at least one box");
  return box_lines(boxes) + "joints = [\n";
}

std::string emit_prompt(std::span<const Obb> boxes) {
  std::vector<BoxEntry> entries;
  entries.reserve(boxes.size());
  for (const Obb& b : boxes) entries.push_back(BoxEntry::from_obb(b));
  return emit_prompt(entries);
}

std::string emit_joints(std::span<const JointLine> joints, Dialect dialect) {
  std::string out = "joints = [\n";
  for (const JointLine& line : joints) {
    if (dialect_of(line) != dialect) {
      throw Error(ErrorCode::DialectMismatch,
                  "joint line of dialect " + std::string(to_string(dialect_of(line))) + " in " + std::string(to_string(dialect)) + " output");
    }
    out += std::visit(LineEmitter{}, line) + "\n";
  }
  return out + "]\n";
}

std::string emit_joints(std::span<const RelativeJoint> joints) {
  std::vector<JointLine> lines(joints.begin(), joints.end());
  return emit_joints(lines, Dialect::EdgeAxis);
}

std::string emit_completion(std::span<const RelativeJoint> joints) {
  constexpr std::string_view header = "joints = [\n";
  return emit_joints(joints).substr(header.size());
}

std::string emit_document(const ArtCodeDocument& doc) { return box_lines(doc.boxes) + emit_joints(doc.joints, doc.dialect); }

// ---------------------------------------------------------------------------
// Cleanup, lexer, parser

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

/// Blanks out fence lines and everything before the first code line, so
/// that line numbers in errors still refer to the original text.
std::string cleanup(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = end + 1;
  }
  bool started = false;
  for (std::string& line : lines) {
    const std::string_view t = trim(line);
    if (starts_with(t, "```")) {
      line.clear();
      continue;
    }
    if (!started) {
      if (starts_with(t, "bbox_") || starts_with(t, "joints") || starts_with(t, "Joint(") || starts_with(t, "Joint (")) {
        started = true;
      } else {
        line.clear();
      }
    }
  }
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }
  return out;
}

enum class Tok { Ident, Number, String, Punct, Other, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string text) : text_(std::move(text)) {}

  const Token& peek() {
    if (!has_peek_) {
      peeked_ = scan();
      has_peek_ = true;
    }
    return peeked_;
  }

  Token next() {
    Token t = peek();
    has_peek_ = false;
    return t;
  }

 private:
  char at(std::size_t i) const { return i < text_.size() ? text_[i] : '\0'; }

  void advance() {
    if (at(pos_) == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  Token scan() {
    for (;;) {
      while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) advance();
      if (at(pos_) == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
        continue;
      }
      break;
    }
    Token t;
    t.line = line_;
    t.column = column_;
    if (pos_ >= text_.size()) return t;
    const char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      t.kind = Tok::Ident;
      while (std::isalnum(static_cast<unsigned char>(at(pos_))) || at(pos_) == '_') {
        t.text += at(pos_);
        advance();
      }
      return t;
    }
    const bool sign = (c == '+' || c == '-');
    const char after = sign ? at(pos_ + 1) : c;
    if (std::isdigit(static_cast<unsigned char>(after)) || (after == '.' && std::isdigit(static_cast<unsigned char>(at(pos_ + (sign ? 2 : 1)))))) {
      t.kind = Tok::Number;
      if (sign) {
        t.text += c;
        advance();
      }
      while (std::isdigit(static_cast<unsigned char>(at(pos_))) || at(pos_) == '.') {
        t.text += at(pos_);
        advance();
      }
      if (at(pos_) == 'e' || at(pos_) == 'E') {
        t.text += at(pos_);
        advance();
        if (at(pos_) == '+' || at(pos_) == '-') {
          t.text += at(pos_);
          advance();
        }
        while (std::isdigit(static_cast<unsigned char>(at(pos_)))) {
          t.text += at(pos_);
          advance();
        }
      }
      return t;
    }
    if (c == '"' || c == '\'') {
      t.kind = Tok::String;
      advance();
      while (pos_ < text_.size() && text_[pos_] != c && text_[pos_] != '\n') {
        t.text += text_[pos_];
        advance();
      }
      if (at(pos_) != c) throw SyntaxError(t.line, t.column, "unterminated string");
      advance();
      return t;
    }
    if (std::string_view("=()[],").find(c) != std::string_view::npos) {
      t.kind = Tok::Punct;
      t.text = std::string(1, c);
      advance();
      return t;
    }
    t.kind = Tok::Other;
    t.text = std::string(1, c);
    advance();
    return t;
  }

  std::string text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
  Token peeked_;
  bool has_peek_ = false;
};

struct Value {
  enum class Kind { Number, String, Ident, List, Call } kind = Kind::Number;
  std::string text;
  double number = 0.0;
  std::vector<Value> items;
  std::vector<std::pair<std::string, Value>> kwargs;
  int line = 1;
  int column = 1;
};

class Parser {
 public:
  Parser(std::string text, Dialect dialect) : lex_(std::move(text)), dialect_(dialect) {}

  ArtCodeDocument parse(std::span<const BoxEntry> supplied) {
    ArtCodeDocument doc;
    doc.dialect = dialect_;
    bool have_joints = false;
    for (;;) {
      const Token& t = lex_.peek();
      if (t.kind == Tok::Ident && starts_with(t.text, "bbox_")) {
        const Token name = lex_.next();
        if (have_joints) throw SyntaxError(name.line, name.column, "box definition after joint list");
        const std::string digits = name.text.substr(5);
        if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit) ||
            std::stoul(digits) != doc.boxes.size()) {
          throw SyntaxError(name.line, name.column,
                            "expected bbox_" + std::to_string(doc.boxes.size()) + ", found " + name.text);
        }
        expect("=");
        doc.boxes.push_back(to_box(parse_value()));
      } else if (t.kind == Tok::Ident && t.text == "joints") {
        lex_.next();
        expect("=");
        expect("[");
        parse_joint_list(doc);
        have_joints = true;
        break;
      } else if (t.kind == Tok::Ident && t.text == "Joint") {
        parse_joint_list(doc);
        have_joints = true;
        break;
      } else if (t.kind == Tok::End || !doc.boxes.empty()) {
        break;  // end of input, or prose after a box-only document
      } else {
        throw SyntaxError(t.line, t.column, "expected bbox_<i>, 'joints = [' or Joint(...), found '" + t.text + "'");
      }
    }
    if (doc.boxes.empty() && !have_joints) throw SyntaxError(1, 1, "no artcode content found");

    const std::span<const BoxEntry> table = doc.boxes.empty() ? supplied : std::span<const BoxEntry>(doc.boxes);
    if (!table.empty()) {
      for (std::size_t i = 0; i < doc.joints.size(); ++i) {
        const int parent = parent_of(doc.joints[i]);
        const int child = child_of(doc.joints[i]);
        for (int idx : {parent, child}) {
          if (idx < 0 || idx >= static_cast<int>(table.size())) {
            throw Error(ErrorCode::UnknownPart, "joint " + std::to_string(i) + " references bbox_" + std::to_string(idx) +
                                                    " but only " + std::to_string(table.size()) + " boxes exist");
          }
        }
      }
    }
    return doc;
  }

 private:
  void expect(const std::string& punct) {
    const Token t = lex_.next();
    if (t.kind != Tok::Punct || t.text != punct) {
      throw SyntaxError(t.line, t.column, "expected '" + punct + "', found '" + (t.kind == Tok::End ? "end of input" : t.text) + "'");
    }
  }

  bool accept(const std::string& punct) {
    const Token& t = lex_.peek();
    if (t.kind == Tok::Punct && t.text == punct) {
      lex_.next();
      return true;
    }
    return false;
  }

  Value parse_value() {
    const Token t = lex_.next();
    Value v;
    v.line = t.line;
    v.column = t.column;
    switch (t.kind) {
      case Tok::Number:
        v.kind = Value::Kind::Number;
        v.text = t.text;
        try {
          v.number = parse_real(t.text);
        } catch (const Error&) {
          throw SyntaxError(t.line, t.column, "malformed number '" + t.text + "'");
        }
        return v;
      case Tok::String:
        v.kind = Value::Kind::String;
        v.text = t.text;
        return v;
      case Tok::Ident:
        v.text = t.text;
        if (accept("(")) {
          v.kind = Value::Kind::Call;
          if (!accept(")")) {
            do {
              const Token key = lex_.next();
              if (key.kind != Tok::Ident) throw SyntaxError(key.line, key.column, "expected keyword argument name");
              expect("=");
              for (const auto& [k, _] : v.kwargs) {
                if (k == key.text) throw SyntaxError(key.line, key.column, "duplicate keyword '" + key.text + "'");
              }
              v.kwargs.emplace_back(key.text, parse_value());
            } while (accept(",") && !(lex_.peek().kind == Tok::Punct && lex_.peek().text == ")"));
            expect(")");
          }
        } else {
          v.kind = Value::Kind::Ident;
        }
        return v;
      case Tok::Punct:
        if (t.text == "[") {
          v.kind = Value::Kind::List;
          if (!accept("]")) {
            do {
              if (lex_.peek().kind == Tok::Punct && lex_.peek().text == "]") break;
              v.items.push_back(parse_value());
            } while (accept(","));
            expect("]");
          }
          return v;
        }
        [[fallthrough]];
      default:
        throw SyntaxError(t.line, t.column, "unexpected '" + (t.kind == Tok::End ? std::string("end of input") : t.text) + "'");
    }
  }

  void parse_joint_list(ArtCodeDocument& doc) {
    for (;;) {
      const Token& t = lex_.peek();
      if (t.kind == Tok::Punct && t.text == "]") {
        lex_.next();
        return;  // trailing commentary is never lexed
      }
      if (t.kind == Tok::End) throw SyntaxError(t.line, t.column, "unterminated joint list (missing ']')");
      if (!(t.kind == Tok::Ident && t.text == "Joint")) {
        throw SyntaxError(t.line, t.column, "expected Joint(...) or ']', found '" + t.text + "'");
      }
      doc.joints.push_back(to_joint(parse_value()));
      accept(",");
    }
  }

  // -- schema checks -------------------------------------------------------

  using Kwargs = std::vector<std::pair<std::string, Value>>;

  static const Value* find(const Kwargs& kw, const std::string& key) {
    for (const auto& [k, v] : kw) {
      if (k == key) return &v;
    }
    return nullptr;
  }

  static void allow_only(const Value& call, std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : call.kwargs) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
        throw SyntaxError(v.line, v.column, "unknown keyword argument '" + k + "' in " + call.text + "(...)");
      }
    }
  }

  static const Value& require(const Value& call, const std::string& key) {
    const Value* v = find(call.kwargs, key);
    if (!v) throw SyntaxError(call.line, call.column, call.text + "(...) is missing '" + key + "'");
    return *v;
  }

  static double number(const Value& v) {
    if (v.kind != Value::Kind::Number) throw SyntaxError(v.line, v.column, "expected a number");
    return v.number;
  }

  static int integer(const Value& v) {
    const double x = number(v);
    if (x != std::floor(x) || std::abs(x) > 1e9) throw SyntaxError(v.line, v.column, "expected an integer, found " + v.text);
    return static_cast<int>(x);
  }

  static int sign(const Value& v) {
    const int s = integer(v);
    if (s != 1 && s != -1) throw SyntaxError(v.line, v.column, "sign must be +1 or -1");
    return s;
  }

  static std::vector<double> numbers(const Value& v, std::size_t n) {
    if (v.kind != Value::Kind::List || v.items.size() != n) {
      throw SyntaxError(v.line, v.column, "expected a list of " + std::to_string(n) + " numbers");
    }
    std::vector<double> out;
    for (const Value& item : v.items) out.push_back(number(item));
    return out;
  }

  static Vec3 vec3(const Value& v) {
    const auto xs = numbers(v, 3);
    return {xs[0], xs[1], xs[2]};
  }

  static BoxEntry to_box(const Value& v) {
    if (v.kind != Value::Kind::Call || v.text != "OBB") throw SyntaxError(v.line, v.column, "expected OBB(...)");
    allow_only(v, {"center", "R", "half"});
    BoxEntry box;
    box.center = vec3(require(v, "center"));
    const Value& r = require(v, "R");
    if (r.kind != Value::Kind::List || r.items.size() != 3) throw SyntaxError(r.line, r.column, "R must be a 3x3 nested list");
    for (int row = 0; row < 3; ++row) box.rotation.row(row) = vec3(r.items[row]).transpose();
    box.half = vec3(require(v, "half"));
    return box;
  }

  static void check_axis_idx(int idx) {
    if (idx < 0 || idx > 2) throw Error(ErrorCode::InvalidAxisIndex, "axis index " + std::to_string(idx) + " not in {0,1,2}");
  }

  void mismatch(const Value& v, Dialect found) const {
    throw Error(ErrorCode::DialectMismatch, "line " + std::to_string(v.line) + ": " + std::string(to_string(found)) +
                                                " joint in " + std::string(to_string(dialect_)) + " input");
  }

  JointLine to_joint(const Value& v) const {
    if (v.kind != Value::Kind::Call || v.text != "Joint") throw SyntaxError(v.line, v.column, "expected Joint(...)");
    allow_only(v, {"type", "parent", "child", "axis", "pivot", "pos", "offset"});
    const Value& type_v = require(v, "type");
    if (type_v.kind != Value::Kind::String) throw SyntaxError(type_v.line, type_v.column, "type must be a string");
    JointType type;
    if (type_v.text == "revolute") {
      type = JointType::Revolute;
    } else if (type_v.text == "prismatic") {
      type = JointType::Prismatic;
    } else {
      throw SyntaxError(type_v.line, type_v.column, "unknown joint type '" + type_v.text + "'");
    }
    const int parent = integer(require(v, "parent"));
    const int child = integer(require(v, "child"));
    const Value& axis = require(v, "axis");
    const Value* pivot = find(v.kwargs, "pivot");
    const Value* pos = find(v.kwargs, "pos");
    const Value* offset = find(v.kwargs, "offset");

    Dialect found;
    if (axis.kind == Value::Kind::List || pos) {
      found = Dialect::AbsoluteNumeric;
    } else if (offset) {
      found = Dialect::RelativeToCenter;
    } else if (pivot) {
      found = Dialect::EdgeAxis;
    } else {
      // A prismatic Axis(...) line is valid in both index-based dialects.
      found = dialect_ == Dialect::AbsoluteNumeric ? Dialect::EdgeAxis : dialect_;
    }
    if (found != dialect_) mismatch(v, found);
    if ((pivot && pos) || (pivot && offset) || (pos && offset)) {
      throw SyntaxError(v.line, v.column, "joint mixes position forms");
    }
    const bool revolute = type == JointType::Revolute;
    const Value* position_value = pivot ? pivot : pos ? pos : offset;
    if (revolute && !position_value) throw SyntaxError(v.line, v.column, "revolute joint needs a position");
    if (!revolute && position_value) {
      throw SyntaxError(position_value->line, position_value->column, "prismatic joint must not carry a position");
    }

    if (found == Dialect::AbsoluteNumeric) {
      AbsoluteJoint j{type, parent, child, vec3(axis), std::nullopt};
      if (pos) j.position = vec3(*pos);
      return j;
    }

    if (axis.kind != Value::Kind::Call || axis.text != "Axis") throw SyntaxError(axis.line, axis.column, "expected Axis(...)");
    allow_only(axis, {"box", "idx", "sign"});
    const int box = integer(require(axis, "box"));
    const int idx = integer(require(axis, "idx"));
    const int axis_sign = sign(require(axis, "sign"));
    check_axis_idx(idx);
    if (box != child) throw SyntaxError(axis.line, axis.column, "Axis box must be the child part (" + std::to_string(child) + ")");

    if (found == Dialect::RelativeToCenter) {
      CenterOffsetJoint j{type, parent, child, idx, axis_sign, std::nullopt};
      if (offset) {
        const auto ab = numbers(*offset, 2);
        j.offset = std::array<double, 2>{ab[0], ab[1]};
      }
      return j;
    }
    RelativeJoint j{type, parent, child, idx, axis_sign, std::nullopt};
    if (pivot) {
      if (pivot->kind != Value::Kind::Call || pivot->text != "Edge") {
        throw SyntaxError(pivot->line, pivot->column, "expected Edge(...)");
      }
      allow_only(*pivot, {"s1", "s2"});
      j.edge_signs = EdgeSigns{sign(require(*pivot, "s1")), sign(require(*pivot, "s2"))};
    }
    return j;
  }

  Lexer lex_;
  Dialect dialect_;
};

}  // namespace

ArtCodeDocument parse_artcode(std::string_view text, Dialect dialect, std::span<const BoxEntry> boxes) {
  Parser parser(cleanup(text), dialect);
  return parser.parse(boxes);
}

// ---------------------------------------------------------------------------
// Execution and MJCF export

Joint resolve_joint(const JointLine& line, const Obb& child_box) {
  struct Resolver {
    const Obb& box;
    Joint operator()(const RelativeJoint& j) const { return dequantize_joint(j, box); }
    Joint operator()(const AbsoluteJoint& j) const {
      const double n = j.axis.norm();
      if (!(n > 0.0)) throw Error(ErrorCode::InvalidArgument, "zero joint axis");
      Joint out{j.type, j.axis / n, std::nullopt, j.parent, j.child, 0.0};
      if (j.type == JointType::Revolute) out.pivot = j.position;
      return out;
    }
    Joint operator()(const CenterOffsetJoint& j) const {
      Joint out{j.type, resolve_axis(box, j.axis_idx, j.axis_sign), std::nullopt, j.parent, j.child, 0.0};
      if (j.type == JointType::Revolute) {
        const int a = (j.axis_idx + 1) % 3;
        const int b = (j.axis_idx + 2) % 3;
        out.pivot = box.center() + (*j.offset)[0] * box.axis(a) + (*j.offset)[1] * box.axis(b);
      }
      return out;
    }
  };
  return std::visit(Resolver{child_box}, line);
}

Execution execute(const ArtCodeDocument& doc, std::span<const Obb> boxes, std::span<const double> states) {
  if (boxes.empty()) throw Error(ErrorCode::UnknownPart, "document has no box table to resolve joints against");
  Execution ex;
  ArticulatedObject& obj = ex.object;
  for (std::size_t i = 0; i < boxes.size(); ++i) obj.parts.push_back(Part{"bbox_" + std::to_string(i), std::nullopt, std::nullopt, boxes[i]});
  const auto n = static_cast<int>(boxes.size());
  std::vector<bool> is_child(boxes.size(), false);
  for (const JointLine& line : doc.joints) {
    const int parent = parent_of(line);
    const int child = child_of(line);
    if (parent < 0 || parent >= n || child < 0 || child >= n) {
      throw Error(ErrorCode::UnknownPart, "joint references a part outside the box table");
    }
    obj.joints.push_back(resolve_joint(line, boxes[child]));
    is_child[child] = true;
  }
  const auto root = std::find(is_child.begin(), is_child.end(), false);
  obj.root = root == is_child.end() ? 0 : static_cast<int>(root - is_child.begin());
  std::vector<double> zeros(obj.joints.size(), 0.0);
  ex.transforms = forward_kinematics(obj, states.empty() ? std::span<const double>(zeros) : states);
  for (std::size_t j = 0; j < obj.joints.size(); ++j) obj.joints[j].state = states.empty() ? 0.0 : states[j];
  return ex;
}

Execution execute(const ArtCodeDocument& doc, std::span<const double> states) {
  std::vector<Obb> boxes;
  boxes.reserve(doc.boxes.size());
  for (const BoxEntry& b : doc.boxes) boxes.push_back(b.to_obb());
  return execute(doc, boxes, states);
}

namespace {

std::string triple(const Vec3& v) { return format_real(v.x()) + " " + format_real(v.y()) + " " + format_real(v.z()); }

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string export_mjcf(const ArticulatedObject& object, std::span<const double> states, const MjcfOptions& options) {
  require_tree(object);
  if (!states.empty() && states.size() != object.joints.size()) {
    throw Error(ErrorCode::StateLengthMismatch, "state count does not match joint count");
  }
  const auto n = static_cast<int>(object.parts.size());
  std::vector<int> parent_joint(n, -1);
  std::vector<std::vector<int>> child_parts(n);
  for (int j = 0; j < static_cast<int>(object.joints.size()); ++j) {
    parent_joint[object.joints[j].child] = j;
    child_parts[object.joints[j].parent].push_back(object.joints[j].child);
  }

  std::string out = "<mujoco model=\"" + xml_escape(options.model_name) + "\">\n  <compiler angle=\"radian\"/>\n";
  if (options.mesh_dir) {
    out += "  <asset>\n";
    for (const Part& p : object.parts) {
      out += "    <mesh name=\"" + xml_escape(p.name) + "\" file=\"" + xml_escape(*options.mesh_dir + "/" + p.name + ".obj") + "\"/>\n";
    }
    out += "  </asset>\n";
  }
  out += "  <worldbody>\n";
  std::vector<int> joint_order;

  auto emit_body = [&](auto&& self, int part, const Vec3& parent_origin, int depth) -> void {
    const Part& p = object.parts[part];
    const std::string pad(2 * depth + 4, ' ');
    const Vec3 origin = p.obb.center();
    out += pad + "<body name=\"" + xml_escape(p.name) + "\" pos=\"" + triple(origin - parent_origin) + "\">\n";
    if (parent_joint[part] >= 0) {
      const Joint& j = object.joints[parent_joint[part]];
      joint_order.push_back(parent_joint[part]);
      out += pad + "  <joint name=\"joint_" + std::to_string(parent_joint[part]) + "\" type=\"" +
             (j.type == JointType::Revolute ? "hinge" : "slide") + "\" axis=\"" + triple(j.axis) + "\"";
      if (j.pivot) out += " pos=\"" + triple(*j.pivot - origin) + "\"";
      out += "/>\n";
    }
    if (options.mesh_dir) {
      out += pad + "  <geom type=\"mesh\" mesh=\"" + xml_escape(p.name) + "\" pos=\"" + triple(-origin) + "\"/>\n";
    } else {
      const Eigen::Quaterniond q(p.obb.rotation());
      out += pad + "  <geom type=\"box\" size=\"" + triple(p.obb.half_lengths()) + "\" quat=\"" + format_real(q.w()) + " " +
             format_real(q.x()) + " " + format_real(q.y()) + " " + format_real(q.z()) + "\"/>\n";
    }
    for (int c : child_parts[part]) self(self, c, origin, depth + 1);
    out += pad + "</body>\n";
  };
  emit_body(emit_body, object.root, Vec3::Zero(), 0);
  out += "  </worldbody>\n";
  if (!joint_order.empty()) {
    out += "  <keyframe>\n    <key name=\"observed\" qpos=\"";
    for (std::size_t i = 0; i < joint_order.size(); ++i) {
      if (i) out += ' ';
      out += format_real(states.empty() ? 0.0 : states[joint_order[i]]);
    }
    out += "\"/>\n  </keyframe>\n";
  }
  return out + "</mujoco>\n";
}

std::string export_mjcf(const ArtCodeDocument& doc, std::span<const double> states, const MjcfOptions& options) {
  const Execution ex = execute(doc, {});
  return export_mjcf(ex.object, states, options);
}

}  // namespace artrecon
