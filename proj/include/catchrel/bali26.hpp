#pragma once

#include <vector>

#include "catchrel/model.hpp"

namespace catchrel {

/// The 26 Bali-26 plant categories.
inline std::vector<Category> bali26_categories() {
  return {
      {"aroid", "Aroid", "Amorphophallus paeoniifolius"},
      {"bamboo", "Bamboo Petung", "Dendrocalamus asper"},
      {"banana", "Banana", "Musa spp."},
      {"cacao", "Cacao", "Theobroma cacao"},
      {"cinnamon", "Indonesian Cinnamon", "Cinnamomum burmanii"},
      {"coffee-arabica", "Coffea Arabica", "Coffea canephora"},
      {"dragonfruit", "Dragonfruit", "Hylocereus costaricensis"},
      {"durian", "Durian", "Durio zibethinus"},
      {"frangipani", "Frangipani", "Plumeria alba"},
      {"guava", "Guava", "Psidium guajava"},
      {"jackfruit", "Jackfruit", "Artocarpus heterophyllus"},
      {"lychee", "Lychee", "Litchi chinensis"},
      {"mango", "Mango", "Mangifera indica"},
      {"mangosteen", "Mangosteen", "Garcinia mangostana"},
      {"nilam", "Nilam", "Pogostemon cablin"},
      {"papaya", "Papaya", "Carica papaya"},
      {"passiflora", "Passiflora", "Passiflora edulis"},
      {"sawo", "Sawo", "Manilkara zapota"},
      {"snakefruit", "Snakefruit", "Salacca zalacca"},
      {"starfruit", "Starfruit", "Averrhoa carambola"},
      {"sugar-palm", "Sugar Palm", "Arenga pinnata"},
      {"taro", "Taro", "Colocasia esculenta"},
      {"vanilla", "Vanilla", "Vanilla planifolia"},
      {"water-guava", "Water Guava", "Syzygium aqueum"},
      {"white-pepper", "White Pepper", "Piper nigrum"},
      {"zodia", "Zodia", "Evodia saueolens"},
  };
}

}  // namespace catchrel
