// Copyright 2026 The pmostore Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Pointer-rich data in a persistent object, no serialization step: the
// object attaches at the same address on every mount, so plain pointers
// stored inside it stay valid across runs. Run it twice to watch the
// list grow.

#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>

#include "pmo/mapped_pmem.hpp"
#include "pmo/page_guard.hpp"
#include "pmo/store.hpp"

namespace {

struct Node {
  Node* next;
  std::uint64_t value;
};

struct ListRoot {
  Node* head;
  std::uint64_t count;
  std::uint64_t next_free;  // bump allocator cursor, in nodes
};

constexpr std::uint64_t kListPages = 16;

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path device =
      argc > 1 ? argv[1] : std::filesystem::temp_directory_path() /
                               "pmo_linked_list.img";
  const std::uint64_t key = pmo::fnv1a64("demo");

  bool fresh = !std::filesystem::exists(device);
  pmo::MappedPmem dev = fresh ? pmo::MappedPmem::create(device, 4 << 20)
                              : pmo::MappedPmem(device);
  pmo::PmoStore store = fresh ? pmo::PmoStore::format(dev, "demo", 8)
                              : pmo::PmoStore::open(dev);
  if (fresh) store.pcreate("list", kListPages * pmo::kPageSize, key);
  store.recover_all();  // no-op unless the last run died mid-sync

  pmo::MappedWindow win(store, dev, "list", pmo::Permission::kWrite, key,
                        static_cast<std::uint64_t>(::getpid()));
  auto* root = reinterpret_cast<ListRoot*>(win.data());
  auto* arena = reinterpret_cast<Node*>(win.data() + sizeof(ListRoot));
  const std::uint64_t capacity =
      (win.size() - sizeof(ListRoot)) / sizeof(Node);

  for (int i = 0; i < 5 && root->next_free < capacity; ++i) {
    Node* n = &arena[root->next_free++];
    n->value = root->count;
    n->next = root->head;  // absolute pointer, durable as-is
    root->head = n;
    root->count += 1;
  }
  win.sync();  // all five inserts become durable atomically

  std::printf("list of %llu nodes:", (unsigned long long)root->count);
  for (Node* n = root->head; n != nullptr; n = n->next) {
    std::printf(" %llu", (unsigned long long)n->value);
  }
  std::printf("\n");
  win.close();
  return 0;
}
