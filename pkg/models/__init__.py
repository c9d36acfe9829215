from models.discriminator import DiscriminatorNet, difference_items, frame_differences
from models.generator import GeneratorNet, GeneratorOutput

__all__ = ["DiscriminatorNet", "GeneratorNet", "GeneratorOutput", "difference_items", "frame_differences"]
