from msgv_types.types import DiscriminatorConfig, EvalConfig, GeneratorConfig, RunConfig, TrainConfig


def tiny_generator_config(**overrides) -> GeneratorConfig:
    values = dict(
        resolution=16, channels=[8, 8], const_channels=8, d_c=8, mapping_layers=1, d_z=4, d_v=4,
        motion_conv_layers=1, motion_kernel=3, anchor_spacing=4.0, k=4, rank=1, d_m=8, d_h=8, motion_hidden=16,
    )
    values.update(overrides)
    return GeneratorConfig(**values)


def tiny_discriminator_config() -> DiscriminatorConfig:
    return DiscriminatorConfig(disc_channels=4, disc_head_channels=8, disc_embed_dim=8, disc_time_dim=4)


def tiny_run_config(generator_overrides=None, **train_overrides) -> RunConfig:
    train = dict(
        frames_per_clip=2, batch_size=2, total_steps=4, r1_interval=2, clip_length=16, dataset_size=4,
        ckpt_every=2, log_every=1, max_gap=4, seed=3, data_seed=5,
    )
    train.update(train_overrides)
    return RunConfig(
        generator=tiny_generator_config(**(generator_overrides or {})),
        discriminator=tiny_discriminator_config(),
        train=TrainConfig(**train),
        eval=EvalConfig(eval_clips=4, eval_frames=4),
    )
