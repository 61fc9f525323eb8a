#include "cora/nf_ir.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "json.hpp"

namespace cora {
namespace {

struct Token {
  std::string text;
  int line = 0;
  int column = 0;
};

std::vector<Token> tokenize(const std::string& source) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto is_word = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == 'x';
  };
  while (i < source.size()) {
    char c = source[i];
    if (c == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++col;
      ++i;
      continue;
    }
    if (c == '#') {
      while (i < source.size() && source[i] != '\n') ++i;
      continue;
    }
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
      int start_col = col;
      std::string word;
      while (i < source.size() && is_word(source[i])) {
        word.push_back(source[i]);
        ++i;
        ++col;
      }
      out.push_back({word, line, start_col});
      continue;
    }
    out.push_back({std::string(1, c), line, col});
    ++i;
    ++col;
  }
  return out;
}

class Parser {
 public:
  explicit Parser(const std::string& source) : tokens_(tokenize(source)) {}

  ProgramIR parse() {
    ProgramIR ir;
    while (!at_end()) {
      const Token& t = peek();
      if (t.text == "states") {
        next();
        parse_states(ir);
      } else if (t.text == "flowgroups") {
        next();
        parse_flowgroups(ir);
      } else if (t.text == "pipeline") {
        next();
        parse_pipeline(ir);
      } else {
        fail("expected section 'states', 'flowgroups' or 'pipeline'", t);
      }
    }
    validate(ir);
    ir.blocks = extract_state_blocks(ir.instructions, ir.states,
                                     build_dependency_graph(ir.instructions));
    finalize(ir);
    return ir;
  }

 private:
  std::vector<Token> tokens_;
  size_t pos_ = 0;

  bool at_end() const { return pos_ >= tokens_.size(); }
  const Token& peek() const {
    if (at_end()) throw ParseError("unexpected end of input", last_line(), 1);
    return tokens_[pos_];
  }
  int last_line() const { return tokens_.empty() ? 1 : tokens_.back().line; }
  Token next() {
    Token t = peek();
    ++pos_;
    return t;
  }
  void expect(const std::string& text) {
    Token t = next();
    if (t.text != text) fail("expected '" + text + "', got '" + t.text + "'", t);
  }
  [[noreturn]] void fail(const std::string& msg, const Token& t) const {
    throw ParseError(msg, t.line, t.column);
  }
  uint64_t parse_uint(const Token& t) const {
    try {
      if (t.text.starts_with("0x")) return std::stoull(t.text.substr(2), nullptr, 16);
      size_t used = 0;
      uint64_t v = std::stoull(t.text, &used);
      if (used != t.text.size()) throw std::invalid_argument(t.text);
      return v;
    } catch (const std::exception&) {
      fail("expected a number, got '" + t.text + "'", t);
    }
  }

  void parse_states(ProgramIR& ir) {
    expect("{");
    while (peek().text != "}") {
      Token kind_tok = next();
      StateDecl s;
      if (kind_tok.text == "table")
        s.kind = StateKind::Table;
      else if (kind_tok.text == "register")
        s.kind = StateKind::Register;
      else
        fail("expected 'table' or 'register'", kind_tok);
      Token name = next();
      s.name = name.text;
      if (ir.states.count(s.name)) fail("duplicate state '" + s.name + "'", name);
      while (peek().text != ";") {
        Token kw = next();
        if (kw.text == "size") {
          s.element_count = parse_uint(next());
        } else if (kw.text == "width") {
          Token w = next();
          s.element_width_bits = static_cast<uint32_t>(parse_uint(w));
          static const uint32_t allowed[] = {8, 16, 32, 64, 1024};
          if (std::find(std::begin(allowed), std::end(allowed), s.element_width_bits) ==
              std::end(allowed))
            fail("unsupported element width " + w.text, w);
        } else if (kw.text == "group") {
          s.flow_group = next().text;
        } else {
          fail("unknown state attribute '" + kw.text + "'", kw);
        }
      }
      expect(";");
      if (s.element_count < 1) fail("element count must be >= 1", name);
      if (s.flow_group.empty()) fail("state '" + s.name + "' has no flow group", name);
      ir.states[s.name] = s;
    }
    expect("}");
  }

  KeyExpr parse_key_expr(ProgramIR& ir) {
    Token fn = next();
    KeyExpr k;
    expect("(");
    auto field_arg = [&] {
      Token f = next();
      if (!ir.packet_fields.count(f.text))
        fail("unknown packet field '" + f.text + "'", f);
      return f.text;
    };
    if (fn.text == "field") {
      k.kind = KeyExpr::Kind::Field;
      k.fields.push_back(field_arg());
    } else if (fn.text == "mask") {
      k.kind = KeyExpr::Kind::Mask;
      k.fields.push_back(field_arg());
      expect(",");
      k.mask = parse_uint(next());
    } else if (fn.text == "hash") {
      k.kind = KeyExpr::Kind::Hash;
      k.fields.push_back(field_arg());
      while (peek().text == ",") {
        next();
        Token t = peek();
        if (std::isdigit(static_cast<unsigned char>(t.text[0]))) {
          k.modulo = parse_uint(next());
          break;
        }
        k.fields.push_back(field_arg());
      }
      if (k.modulo == 0) fail("hash() needs a trailing modulus", fn);
    } else if (fn.text == "lookup") {
      k.kind = KeyExpr::Kind::Lookup;
      k.table = next().text;
      expect(",");
      k.fields.push_back(field_arg());
      expect(",");
      k.modulo = parse_uint(next());
    } else if (fn.text == "const") {
      k.kind = KeyExpr::Kind::Constant;
    } else {
      fail("unknown key expression '" + fn.text + "'", fn);
    }
    expect(")");
    return k;
  }

  void parse_flowgroups(ProgramIR& ir) {
    expect("{");
    while (peek().text != "}") {
      Token head = next();
      if (head.text == "fields") {
        while (peek().text != ";") ir.packet_fields.insert(next().text);
        expect(";");
        continue;
      }
      FlowGroupDecl fg;
      fg.name = head.text;
      if (ir.flow_groups.count(fg.name)) fail("duplicate flow group '" + fg.name + "'", head);
      Token mode = next();
      if (mode.text == "one_to_one")
        fg.mode = MapMode::OneToOne;
      else if (mode.text == "many_to_one")
        fg.mode = MapMode::ManyToOne;
      else if (mode.text == "random")
        fg.mode = MapMode::RandomOneToMany;
      else
        fail("expected mapping mode, got '" + mode.text + "'", mode);
      if (fg.mode != MapMode::RandomOneToMany) {
        expect("key");
        fg.key = parse_key_expr(ir);
      }
      expect(";");
      ir.flow_groups[fg.name] = fg;
    }
    expect("}");
  }

  void parse_pipeline(ProgramIR& ir) {
    expect("{");
    std::set<std::string> defined;
    while (peek().text != "}") {
      Token id = next();
      Instruction ins;
      ins.id = id.text;
      if (defined.count(ins.id)) fail("value '" + ins.id + "' defined twice", id);
      expect("=");
      Token op = next();
      auto operand = [&](const Token& t) {
        if (!defined.count(t.text))
          fail("use of undefined value '" + t.text + "'", t);
        ins.reads.push_back(t.text);
      };
      if (op.text == "read" || op.text == "write") {
        ins.op = op.text == "read" ? OpClass::StateRead : OpClass::StateWrite;
        Token st = next();
        if (!ir.states.count(st.text)) fail("undeclared state '" + st.text + "'", st);
        ins.state_ref = st.text;
      } else if (op.text == "alu") {
        ins.op = OpClass::StatelessAlu;
      } else if (op.text == "branch") {
        ins.op = OpClass::BranchPredicate;
      } else if (op.text == "emit") {
        ins.op = OpClass::HeaderEmit;
      } else {
        fail("unknown op '" + op.text + "'", op);
      }
      while (peek().text != ";") {
        Token t = next();
        if (t.text == "if") {
          Token cond = next();
          if (!defined.count(cond.text))
            fail("use of undefined predicate '" + cond.text + "'", cond);
          ins.condition = cond.text;
        } else if (t.text == "slow_path") {
          ins.slow_path = true;
        } else {
          operand(t);
        }
      }
      expect(";");
      defined.insert(ins.id);
      ir.instructions.push_back(ins);
    }
    expect("}");
  }

  void validate(ProgramIR& ir) const {
    for (const auto& [name, s] : ir.states) {
      if (!ir.flow_groups.count(s.flow_group))
        throw ParseError("state '" + name + "' references unknown flow group '" +
                             s.flow_group + "'",
                         1, 1);
    }
    std::map<std::string, const Instruction*> by_id;
    for (const auto& ins : ir.instructions) by_id[ins.id] = &ins;
    for (const auto& ins : ir.instructions) {
      if (!ins.condition.empty()) {
        const Instruction* c = by_id.at(ins.condition);
        if (c->op != OpClass::BranchPredicate)
          throw ParseError("condition '" + ins.condition + "' is not a branch", 1, 1);
      }
      if (ins.op == OpClass::StateWrite &&
          ir.states.at(ins.state_ref).kind == StateKind::Table && !ins.slow_path)
        throw ParseError("data-path write to read-only table '" + ins.state_ref + "'", 1, 1);
    }
  }

  void finalize(ProgramIR& ir) const {
    std::set<std::string> in_block;
    for (const auto& b : ir.blocks)
      for (const auto& i : b.instructions) in_block.insert(i);
    ir.stateless_instruction_count =
        static_cast<int>(ir.instructions.size() - in_block.size());

    for (const auto& [name, fg] : ir.flow_groups) {
      uint64_t card = 0;
      switch (fg.mode) {
        case MapMode::RandomOneToMany:
          card = 1;
          break;
        case MapMode::OneToOne:
          card = 0;  // per-flow, trace-dependent
          break;
        case MapMode::ManyToOne:
          switch (fg.key.kind) {
            case KeyExpr::Kind::Mask:
              card = uint64_t{1} << std::popcount(fg.key.mask);
              break;
            case KeyExpr::Kind::Hash:
            case KeyExpr::Kind::Lookup:
              card = fg.key.modulo;
              break;
            case KeyExpr::Kind::Constant:
              card = 1;
              break;
            case KeyExpr::Kind::Field:
              card = 0;
              break;
          }
          break;
      }
      ir.flow_group_domains[name] = card;
    }

    // Condense instruction dependencies onto blocks.
    std::map<std::string, std::string> block_of_instr;
    for (const auto& b : ir.blocks)
      for (const auto& i : b.instructions) block_of_instr[i] = b.id;
    InstrGraph g = build_dependency_graph(ir.instructions);
    for (const auto& b : ir.blocks) ir.block_dependency[b.id] = {};
    for (const auto& [from, tos] : g) {
      auto itf = block_of_instr.find(from);
      if (itf == block_of_instr.end()) continue;
      for (const auto& to : tos) {
        auto itt = block_of_instr.find(to);
        if (itt == block_of_instr.end() || itt->second == itf->second) continue;
        ir.block_dependency[itf->second].insert(itt->second);
      }
    }
  }
};

}  // namespace

uint64_t StateBlock::element_bytes(const std::map<std::string, StateDecl>& states_by_name) const {
  uint64_t total = 0;
  for (const auto& s : states) total += states_by_name.at(s).element_width_bits / 8;
  return total;
}

uint64_t StateBlock::total_bytes(const std::map<std::string, StateDecl>& states_by_name) const {
  uint64_t total = 0;
  for (const auto& s : states) {
    const StateDecl& d = states_by_name.at(s);
    total += d.element_count * (d.element_width_bits / 8);
  }
  return total;
}

const StateBlock& ProgramIR::block(const std::string& id) const {
  for (const auto& b : blocks)
    if (b.id == id) return b;
  throw ModelError("unknown state block '" + id + "'");
}

const StateBlock* ProgramIR::block_of_state(const std::string& state) const {
  for (const auto& b : blocks)
    if (std::find(b.states.begin(), b.states.end(), state) != b.states.end()) return &b;
  return nullptr;
}

ProgramIR parse_program(const std::string& source) { return Parser(source).parse(); }

InstrGraph build_dependency_graph(const std::vector<Instruction>& instructions) {
  std::map<std::string, std::string> def_of;  // value -> defining instruction
  for (const auto& ins : instructions) def_of[ins.id] = ins.id;
  InstrGraph g;
  for (const auto& ins : instructions) {
    auto& edges = g[ins.id];
    for (const auto& v : ins.reads) {
      auto it = def_of.find(v);
      if (it != def_of.end() && it->second != ins.id) edges.insert(it->second);
    }
    if (!ins.condition.empty()) edges.insert(ins.condition);
  }
  return g;
}

namespace {

// Iterative Tarjan SCC over string-keyed graphs.
std::vector<std::vector<std::string>> tarjan_scc(
    const std::map<std::string, std::set<std::string>>& graph) {
  std::map<std::string, int> index, lowlink;
  std::map<std::string, bool> on_stack;
  std::vector<std::string> stack;
  std::vector<std::vector<std::string>> sccs;
  int counter = 0;

  std::function<void(const std::string&)> strongconnect = [&](const std::string& v) {
    index[v] = lowlink[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    auto it = graph.find(v);
    if (it != graph.end()) {
      for (const auto& w : it->second) {
        if (!graph.count(w)) continue;
        if (!index.count(w)) {
          strongconnect(w);
          lowlink[v] = std::min(lowlink[v], lowlink[w]);
        } else if (on_stack[w]) {
          lowlink[v] = std::min(lowlink[v], index[w]);
        }
      }
    }
    if (lowlink[v] == index[v]) {
      std::vector<std::string> scc;
      while (true) {
        std::string w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        scc.push_back(w);
        if (w == v) break;
      }
      sccs.push_back(std::move(scc));
    }
  };
  for (const auto& [v, _] : graph)
    if (!index.count(v)) strongconnect(v);
  return sccs;
}

std::set<std::string> reachable_from(const InstrGraph& g, const std::string& start) {
  std::set<std::string> seen{start};
  std::vector<std::string> work{start};
  while (!work.empty()) {
    std::string v = work.back();
    work.pop_back();
    auto it = g.find(v);
    if (it == g.end()) continue;
    for (const auto& w : it->second)
      if (seen.insert(w).second) work.push_back(w);
  }
  return seen;
}

}  // namespace

std::vector<StateBlock> extract_state_blocks(const std::vector<Instruction>& instructions,
                                             const std::map<std::string, StateDecl>& states,
                                             const InstrGraph& graph) {
  std::map<std::string, const Instruction*> by_id;
  for (const auto& ins : instructions) by_id[ins.id] = &ins;

  // Does instruction `ins` read state `s`? Direct state_read, or the
  // predicate-implies-read rule: its condition consumes a value produced by a
  // read of `s`.
  auto reads_state = [&](const Instruction& ins, const std::string& s) {
    if (ins.op == OpClass::StateRead && ins.state_ref == s) return true;
    if (!ins.condition.empty()) {
      const Instruction& cond = *by_id.at(ins.condition);
      for (const auto& v : cond.reads) {
        auto it = by_id.find(v);
        if (it != by_id.end() && it->second->op == OpClass::StateRead &&
            it->second->state_ref == s)
          return true;
      }
    }
    return false;
  };

  std::map<std::string, std::vector<const Instruction*>> writers;
  for (const auto& ins : instructions)
    if (ins.op == OpClass::StateWrite) writers[ins.state_ref].push_back(&ins);

  std::map<std::string, std::set<std::string>> reach_cache;
  auto reach = [&](const std::string& id) -> const std::set<std::string>& {
    auto it = reach_cache.find(id);
    if (it == reach_cache.end())
      it = reach_cache.emplace(id, reachable_from(graph, id)).first;
    return it->second;
  };

  // State dependency graph: A -> B when a write of A transitively depends on
  // a read of B.
  std::map<std::string, std::set<std::string>> state_graph;
  for (const auto& [name, _] : states) state_graph[name] = {};
  for (const auto& [a, ws] : writers) {
    for (const auto* w : ws) {
      for (const auto& x : reach(w->id)) {
        const Instruction& xi = *by_id.at(x);
        for (const auto& [b, _] : states)
          if (reads_state(xi, b)) state_graph[a].insert(b);
      }
    }
  }

  auto sccs = tarjan_scc(state_graph);

  std::vector<StateBlock> blocks;
  for (auto& scc : sccs) {
    std::sort(scc.begin(), scc.end());
    StateBlock b;
    b.states = scc;
    std::string id;
    for (const auto& s : scc) {
      if (!id.empty()) id += "+";
      id += s;
    }
    b.id = id;

    std::set<std::string> block_states(scc.begin(), scc.end());
    std::set<std::string> members;
    std::set<std::string> read_accessors;
    for (const auto& ins : instructions) {
      bool accesses = false;
      if ((ins.op == OpClass::StateRead || ins.op == OpClass::StateWrite) &&
          block_states.count(ins.state_ref))
        accesses = true;
      for (const auto& s : block_states)
        if (reads_state(ins, s)) {
          accesses = true;
          read_accessors.insert(ins.id);
        }
      if (accesses) members.insert(ins.id);
    }
    // Pull in instructions sitting on a dependency path from a block write
    // down to a block read; they must co-locate with the state.
    std::set<std::string> from_writes;
    for (const auto& s : scc) {
      auto it = writers.find(s);
      if (it == writers.end()) continue;
      for (const auto* w : it->second)
        for (const auto& x : reach(w->id)) from_writes.insert(x);
    }
    for (const auto& x : from_writes) {
      const auto& r = reach(x);
      for (const auto& acc : read_accessors)
        if (r.count(acc)) members.insert(x);
    }

    for (const auto& ins : instructions) {
      if (!members.count(ins.id)) continue;
      b.instructions.push_back(ins.id);
      if (ins.op == OpClass::StateWrite && !ins.slow_path) b.has_write = true;
    }
    for (const auto& s : scc) b.flow_groups.insert(states.at(s).flow_group);

    // Per-packet access intensity, grouped by (op, mode, size); slow-path
    // instructions are not counted.
    std::map<std::tuple<bool, bool, uint32_t>, double> acc;
    for (const auto& ins : instructions) {
      if (ins.slow_path) continue;
      if (ins.op != OpClass::StateRead && ins.op != OpClass::StateWrite) continue;
      if (!block_states.count(ins.state_ref)) continue;
      const StateDecl& d = states.at(ins.state_ref);
      bool atomic = d.kind == StateKind::Register;
      acc[{ins.op == OpClass::StateWrite, atomic, d.element_width_bits / 8}] += 1.0;
    }
    for (const auto& [k, intensity] : acc) {
      BlockAccess a;
      a.is_write = std::get<0>(k);
      a.atomic = std::get<1>(k);
      a.size_bytes = std::get<2>(k);
      a.intensity = intensity;
      b.accesses.push_back(a);
    }
    if (!b.instructions.empty() || !b.states.empty()) blocks.push_back(std::move(b));
  }
  std::sort(blocks.begin(), blocks.end(),
            [](const StateBlock& a, const StateBlock& b) { return a.id < b.id; });
  return blocks;
}

std::string ProgramIR::canonical_json() const {
  nlohmann::json j;
  for (const auto& [name, s] : states) {
    j["states"][name] = {{"kind", s.kind == StateKind::Table ? "table" : "register"},
                         {"size", s.element_count},
                         {"width_bits", s.element_width_bits},
                         {"group", s.flow_group}};
  }
  j["flow_group_domains"] = flow_group_domains;
  j["stateless_instruction_count"] = stateless_instruction_count;
  for (const auto& b : blocks) {
    nlohmann::json jb;
    jb["states"] = b.states;
    jb["instructions"] = b.instructions;
    jb["has_write"] = b.has_write;
    jb["flow_groups"] = std::vector<std::string>(b.flow_groups.begin(), b.flow_groups.end());
    nlohmann::json ja = nlohmann::json::array();
    for (const auto& a : b.accesses)
      ja.push_back({{"op", a.is_write ? "write" : "read"},
                    {"mode", a.atomic ? "atomic" : "bulk"},
                    {"size_bytes", a.size_bytes},
                    {"intensity", a.intensity}});
    jb["accesses"] = ja;
    j["blocks"][b.id] = jb;
  }
  for (const auto& [from, tos] : block_dependency)
    j["block_dependency"][from] = std::vector<std::string>(tos.begin(), tos.end());
  return j.dump(2);
}

}  // namespace cora
