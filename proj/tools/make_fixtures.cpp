// Regenerates the bundled synthetic corpora under data/.
//
//   seover_make_fixtures <out_dir>

#include <fstream>
#include <iostream>
#include <string>

#include "seover/corpus.hpp"
#include "seover/synthetic.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: " << argv[0] << " <out_dir>\n";
    return 2;
  }
  const std::string dir = argv[1];
  {
    std::ofstream out(dir + "/keyword_corpus.jsonl");
    seover::write_corpus(out, seover::synthetic::keyword_corpus(200, 2024));
  }
  {
    std::ofstream out(dir + "/context_corpus.jsonl");
    seover::write_corpus(out, seover::synthetic::context_corpus({}, 2025));
  }
  return 0;
}
