#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cora/common.hpp"

namespace cora {

enum class StateKind { Table, Register };
enum class MapMode { OneToOne, ManyToOne, RandomOneToMany };
enum class OpClass { StatelessAlu, StateRead, StateWrite, HeaderEmit, BranchPredicate };

// FlowGroupID key expression: field selection, bitwise mask, modular hash,
// or table-lookup indirection. const() maps every flow to group 0.
struct KeyExpr {
  enum class Kind { Field, Mask, Hash, Lookup, Constant };
  Kind kind = Kind::Constant;
  std::vector<std::string> fields;
  uint64_t mask = 0;
  uint64_t modulo = 0;       // hash / lookup range
  std::string table;         // lookup indirection target
};

struct FlowGroupDecl {
  std::string name;
  MapMode mode = MapMode::ManyToOne;
  KeyExpr key;
};

struct StateDecl {
  std::string name;
  StateKind kind = StateKind::Register;
  uint64_t element_count = 1;
  uint32_t element_width_bits = 32;
  std::string flow_group;
};

struct Instruction {
  std::string id;            // also the value this instruction defines
  OpClass op = OpClass::StatelessAlu;
  std::string state_ref;
  std::vector<std::string> reads;
  std::string condition;     // id of a branch_predicate instruction
  bool slow_path = false;
};

// Accesses a state block issues per packet, before tier placement.
struct BlockAccess {
  bool is_write = false;
  bool atomic = true;        // registers atomic, tables bulk
  uint32_t size_bytes = 4;
  double intensity = 0.0;    // operations per packet
};

struct StateBlock {
  std::string id;                        // joined sorted state names
  std::vector<std::string> states;       // sorted
  std::vector<std::string> instructions;
  std::set<std::string> flow_groups;
  bool has_write = false;
  std::vector<BlockAccess> accesses;
  // bytes of one element across all states of the block
  uint64_t element_bytes(const std::map<std::string, StateDecl>& states_by_name) const;
  uint64_t total_bytes(const std::map<std::string, StateDecl>& states_by_name) const;
};

struct ProgramIR {
  std::map<std::string, StateDecl> states;
  std::map<std::string, FlowGroupDecl> flow_groups;
  std::vector<Instruction> instructions;
  std::set<std::string> packet_fields;
  std::vector<StateBlock> blocks;
  // block id -> ids of blocks it depends on (control/data order)
  std::map<std::string, std::set<std::string>> block_dependency;
  std::map<std::string, uint64_t> flow_group_domains;  // 0 = per-flow (unbounded)
  int stateless_instruction_count = 0;

  const StateBlock& block(const std::string& id) const;
  const StateBlock* block_of_state(const std::string& state) const;
  std::string canonical_json() const;
};

// Dependency graph over instructions: edge a -> b iff a reads a value
// defined by b or a's condition is b (or depends on b's value).
using InstrGraph = std::map<std::string, std::set<std::string>>;

ProgramIR parse_program(const std::string& source);
InstrGraph build_dependency_graph(const std::vector<Instruction>& instructions);

// State-block extraction: SCCs of the state dependency graph, where state
// A -> B when a write of A transitively depends on a read of B.
std::vector<StateBlock> extract_state_blocks(const std::vector<Instruction>& instructions,
                                             const std::map<std::string, StateDecl>& states,
                                             const InstrGraph& graph);

}  // namespace cora
